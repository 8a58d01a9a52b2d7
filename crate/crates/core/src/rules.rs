//! Conjunctive rules with multi-label heads and additive rule ensembles.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "<=")]
    Leq,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Neq,
}

impl Operator {
    pub fn symbol(self) -> &'static str {
        match self {
            Operator::Leq => "<=",
            Operator::Gt => ">",
            Operator::Eq => "==",
            Operator::Neq => "!=",
        }
    }

    pub fn is_numerical(self) -> bool {
        matches!(self, Operator::Leq | Operator::Gt)
    }

    pub fn complement(self) -> Self {
        match self {
            Operator::Leq => Operator::Gt,
            Operator::Gt => Operator::Leq,
            Operator::Eq => Operator::Neq,
            Operator::Neq => Operator::Eq,
        }
    }
}

/// `attribute <op> value`. Nominal values are category indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub attribute: usize,
    pub operator: Operator,
    pub value: f64,
}

impl Condition {
    pub fn new(attribute: usize, operator: Operator, value: f64) -> Self {
        Self {
            attribute,
            operator,
            value,
        }
    }

    #[inline]
    pub fn holds(&self, x: f64) -> bool {
        match self.operator {
            Operator::Leq => x <= self.value,
            Operator::Gt => x > self.value,
            Operator::Eq => x == self.value,
            Operator::Neq => x != self.value,
        }
    }

    pub fn evaluate(&self, example: &[f64]) -> Result<bool> {
        match example.get(self.attribute) {
            Some(x) if !x.is_nan() => Ok(self.holds(*x)),
            _ => Err(Error::MissingValue {
                attribute: self.attribute,
            }),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "a{} {} {}",
            self.attribute,
            self.operator.symbol(),
            self.value
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub body: Vec<Condition>,
    pub head: Vec<f64>,
}

impl Rule {
    pub fn new(body: Vec<Condition>, head: Vec<f64>) -> Self {
        Self { body, head }
    }

    pub fn is_default(&self) -> bool {
        self.body.is_empty()
    }

    pub fn covers(&self, example: &[f64]) -> Result<bool> {
        for condition in &self.body {
            if !condition.evaluate(example)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("IF ")?;
        if self.body.is_empty() {
            f.write_str("TRUE")?;
        }
        for (i, c) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(" THEN (")?;
        for (i, s) in self.head.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub label_count: usize,
    pub rules: Vec<Rule>,
}

impl Ensemble {
    pub fn new(label_count: usize) -> Self {
        Self {
            label_count,
            rules: Vec::new(),
        }
    }

    pub fn push(&mut self, rule: Rule) -> Result<()> {
        if rule.head.len() != self.label_count {
            return Err(Error::DimensionMismatch {
                expected: self.label_count,
                found: rule.head.len(),
            });
        }
        self.rules.push(rule);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Element-wise sum of the heads of all covering rules.
    pub fn predict_scores(&self, example: &[f64]) -> Result<Vec<f64>> {
        let mut scores = vec![0.0; self.label_count];
        for rule in &self.rules {
            if rule.covers(example)? {
                for (s, h) in scores.iter_mut().zip(&rule.head) {
                    *s += h;
                }
            }
        }
        Ok(scores)
    }

    pub fn predict(&self, example: &[f64]) -> Result<Vec<f64>> {
        Ok(discretize(&self.predict_scores(example)?))
    }

    /// One rule per line, `IF cond & cond THEN (s1,...,sL)`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&rule.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            rules.push(parse_rule(line).map_err(|m| Error::parse(i + 1, m))?);
        }
        let label_count = rules.first().map_or(0, |r: &Rule| r.head.len());
        let mut ensemble = Ensemble::new(label_count);
        for (i, rule) in rules.into_iter().enumerate() {
            ensemble
                .push(rule)
                .map_err(|_| Error::parse(i + 1, "head length differs from the first rule"))?;
        }
        Ok(ensemble)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ensemble: Ensemble = serde_json::from_str(text)?;
        if let Some(bad) = ensemble
            .rules
            .iter()
            .find(|r| r.head.len() != ensemble.label_count)
        {
            return Err(Error::DimensionMismatch {
                expected: ensemble.label_count,
                found: bad.head.len(),
            });
        }
        Ok(ensemble)
    }
}

fn parse_rule(line: &str) -> std::result::Result<Rule, String> {
    let rest = line.strip_prefix("IF ").ok_or("expected `IF`")?;
    let (body, head) = rest.split_once(" THEN ").ok_or("expected `THEN`")?;
    let body = body.trim();
    let conditions = if body == "TRUE" {
        Vec::new()
    } else {
        body.split(" & ")
            .map(parse_condition)
            .collect::<std::result::Result<_, _>>()?
    };
    let head = head
        .trim()
        .strip_prefix('(')
        .and_then(|h| h.strip_suffix(')'))
        .ok_or("head must be parenthesized")?;
    let head = head
        .split(',')
        .map(|s| f64::from_str(s.trim()).map_err(|e| format!("bad score {s:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    Ok(Rule::new(conditions, head))
}

fn parse_condition(text: &str) -> std::result::Result<Condition, String> {
    let mut parts = text.split_whitespace();
    let (Some(attr), Some(op), Some(value), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(format!("malformed condition {text:?}"));
    };
    let attribute = attr
        .strip_prefix('a')
        .and_then(|a| a.parse().ok())
        .ok_or_else(|| format!("bad attribute {attr:?}"))?;
    let operator = match op {
        "<=" => Operator::Leq,
        ">" => Operator::Gt,
        "==" => Operator::Eq,
        "!=" => Operator::Neq,
        _ => return Err(format!("unknown operator {op:?}")),
    };
    let value = value
        .parse()
        .map_err(|e| format!("bad value {value:?}: {e}"))?;
    Ok(Condition::new(attribute, operator, value))
}

/// `+1` where the score is strictly positive, `-1` otherwise.
pub fn discretize(scores: &[f64]) -> Vec<f64> {
    scores
        .iter()
        .map(|&s| if s > 0.0 { 1.0 } else { -1.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_body_covers_everything() {
        let rule = Rule::new(vec![], vec![1.0]);
        assert!(rule.covers(&[]).unwrap());
        assert!(rule.covers(&[1.0, 2.0]).unwrap());
    }

    #[test]
    fn numerical_condition() {
        let rule = Rule::new(vec![Condition::new(0, Operator::Leq, 2.0)], vec![1.0]);
        assert!(!rule.covers(&[3.0]).unwrap());
        assert!(rule.covers(&[2.0]).unwrap());
    }

    #[test]
    fn conjunction_with_nominal() {
        // x2 encodes categories {"a": 0, "b": 1}
        let rule = Rule::new(
            vec![
                Condition::new(0, Operator::Leq, 2.0),
                Condition::new(1, Operator::Neq, 0.0),
            ],
            vec![1.0],
        );
        assert!(rule.covers(&[1.0, 1.0]).unwrap());
        assert!(!rule.covers(&[1.0, 0.0]).unwrap());
    }

    #[test]
    fn missing_value_rejected() {
        let rule = Rule::new(vec![Condition::new(3, Operator::Gt, 0.0)], vec![1.0]);
        assert!(matches!(
            rule.covers(&[1.0]),
            Err(Error::MissingValue { attribute: 3 })
        ));
        assert!(matches!(
            rule.covers(&[0.0, 0.0, 0.0, f64::NAN]),
            Err(Error::MissingValue { attribute: 3 })
        ));
    }

    fn toy_ensemble() -> Ensemble {
        let mut e = Ensemble::new(2);
        e.push(Rule::new(
            vec![Condition::new(0, Operator::Leq, 1.0)],
            vec![0.5, -1.0],
        ))
        .unwrap();
        e.push(Rule::new(
            vec![Condition::new(0, Operator::Gt, 0.0)],
            vec![0.25, 2.0],
        ))
        .unwrap();
        e
    }

    #[test]
    fn prediction_examples() {
        assert_eq!(
            Ensemble::new(3).predict_scores(&[1.0]).unwrap(),
            vec![0.0; 3]
        );
        let e = toy_ensemble();
        assert_eq!(e.predict_scores(&[0.5]).unwrap(), vec![0.75, 1.0]);
        assert_eq!(e.predict_scores(&[-1.0]).unwrap(), vec![0.5, -1.0]);
        assert_eq!(e.predict_scores(&[2.0]).unwrap(), vec![0.25, 2.0]);
    }

    #[test]
    fn head_length_checked() {
        let mut e = Ensemble::new(2);
        assert!(e.push(Rule::new(vec![], vec![1.0])).is_err());
    }

    #[test]
    fn discretize_examples() {
        assert_eq!(discretize(&[0.3, -0.2]), vec![1.0, -1.0]);
        assert_eq!(discretize(&[0.0, 0.0]), vec![-1.0, -1.0]);
        assert_eq!(discretize(&[1e-12, -1e-12]), vec![1.0, -1.0]);
    }

    #[test]
    fn text_format() {
        let mut e = toy_ensemble();
        e.push(Rule::new(vec![], vec![0.1, -0.30000000000000004]))
            .unwrap();
        let text = e.to_text();
        assert!(text.starts_with("IF a0 <= 1 THEN (0.5,-1)\n"));
        assert!(text.contains("IF TRUE THEN (0.1,-0.30000000000000004)"));
        assert_eq!(Ensemble::from_text(&text).unwrap(), e);
        assert!(Ensemble::from_text("IF a0 ~ 1 THEN (1)").is_err());
    }

    fn arb_rule(l: usize) -> impl Strategy<Value = Rule> {
        let cond = (
            0usize..5,
            0usize..4,
            any::<f64>().prop_filter("finite", |v| v.is_finite()),
        )
            .prop_map(|(a, o, v)| {
                let op = [Operator::Leq, Operator::Gt, Operator::Eq, Operator::Neq][o];
                Condition::new(a, op, v)
            });
        (
            prop::collection::vec(cond, 0..4),
            prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), l),
        )
            .prop_map(|(body, head)| Rule::new(body, head))
    }

    proptest! {
        #[test]
        fn serialization_round_trips_exactly(rules in prop::collection::vec(arb_rule(3), 1..6)) {
            let mut e = Ensemble::new(3);
            for r in rules { e.push(r).unwrap(); }
            prop_assert_eq!(&Ensemble::from_text(&e.to_text()).unwrap(), &e);
            prop_assert_eq!(&Ensemble::from_json(&e.to_json().unwrap()).unwrap(), &e);
        }

        #[test]
        fn rule_order_does_not_matter(x in -2.0f64..3.0, seed in 0usize..6) {
            let e = toy_ensemble();
            let mut shuffled = e.clone();
            shuffled.rules.rotate_left(seed % 2);
            let a = e.predict_scores(&[x]).unwrap();
            let b = shuffled.predict_scores(&[x]).unwrap();
            for (p, q) in a.iter().zip(&b) { prop_assert!((p - q).abs() <= 1e-15); }
        }

        #[test]
        fn zero_head_changes_nothing(x in -2.0f64..3.0, threshold in -2.0f64..3.0) {
            let e = toy_ensemble();
            let mut extended = e.clone();
            extended.push(Rule::new(vec![Condition::new(0, Operator::Leq, threshold)], vec![0.0, 0.0])).unwrap();
            prop_assert_eq!(e.predict(&[x]).unwrap(), extended.predict(&[x]).unwrap());
            prop_assert_eq!(e.predict_scores(&[x]).unwrap(), extended.predict_scores(&[x]).unwrap());
        }
    }
}

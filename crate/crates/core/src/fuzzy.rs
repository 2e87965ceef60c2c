//! Two-input Mamdani inference over gray levels.
//!
//! Rules combine antecedent degrees with `min` (AND) or `max` (OR), clip the
//! consequent set with `min`, aggregate rules with a pointwise `max`, and
//! defuzzify by the centroid of the aggregated curve sampled on a uniform grid
//! that includes both domain endpoints.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GRAY_DOMAIN: [f64; 2] = [0.0, 255.0];
pub const DEFAULT_DEFUZZ_RESOLUTION: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuzzyError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("unknown term label `{label}` for variable `{variable}`")]
    UnknownTermLabel { variable: String, label: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("rule base is empty")]
    EmptyRuleBase,
    #[error("malformed rule `{rule}`: {reason}")]
    MalformedRule { rule: String, reason: String },
    #[error("no rule fired for inputs ({0}, {1})")]
    ZeroActivation(f64, f64),
}

/// A fuzzy set over the real line, parameterized in gray-level units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum MembershipFunction {
    Triangular {
        a: f64,
        b: f64,
        c: f64,
    },
    Trapezoidal {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
    },
    Gaussian {
        mean: f64,
        sigma: f64,
    },
    /// `1 / (1 + |(x - c) / a|^(2b))`
    #[serde(rename = "gbell")]
    GeneralizedBell {
        a: f64,
        b: f64,
        c: f64,
    },
}

impl MembershipFunction {
    pub fn validate(&self) -> Result<(), FuzzyError> {
        use MembershipFunction::*;
        let params: &[f64] = match self {
            Triangular { a, b, c } => &[*a, *b, *c],
            Trapezoidal { a, b, c, d } => &[*a, *b, *c, *d],
            Gaussian { mean, sigma } => &[*mean, *sigma],
            GeneralizedBell { a, b, c } => &[*a, *b, *c],
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(FuzzyError::InvalidParameters(format!(
                "non-finite parameter in {self:?}"
            )));
        }
        let ok = match *self {
            Triangular { a, b, c } => a <= b && b <= c,
            Trapezoidal { a, b, c, d } => a <= b && b <= c && c <= d,
            Gaussian { sigma, .. } => sigma > 0.0,
            GeneralizedBell { a, b, .. } => a > 0.0 && b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(FuzzyError::InvalidParameters(format!("{self:?}")))
        }
    }

    /// Membership degree in `[0, 1]`. NaN inputs have degree 0.
    pub fn degree(&self, x: f64) -> f64 {
        use MembershipFunction::*;
        if x.is_nan() {
            return 0.0;
        }
        match *self {
            Triangular { a, b, c } => {
                if x < a || x > c {
                    0.0
                } else if x <= b {
                    if b > a {
                        (x - a) / (b - a)
                    } else {
                        1.0
                    }
                } else if c > b {
                    (c - x) / (c - b)
                } else {
                    1.0
                }
            }
            Trapezoidal { a, b, c, d } => {
                if x < a || x > d {
                    0.0
                } else if x < b {
                    (x - a) / (b - a)
                } else if x <= c {
                    1.0
                } else {
                    (d - x) / (d - c)
                }
            }
            Gaussian { mean, sigma } => {
                let z = (x - mean) / sigma;
                (-0.5 * z * z).exp()
            }
            GeneralizedBell { a, b, c } => {
                let u = ((x - c) / a).abs();
                1.0 / (1.0 + u.powf(2.0 * b))
            }
        }
    }

    /// Closed interval outside which the degree is zero.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            MembershipFunction::Triangular { a, c, .. } => (a, c),
            MembershipFunction::Trapezoidal { a, d, .. } => (a, d),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub label: String,
    pub mf: MembershipFunction,
}

impl Term {
    pub fn new(label: impl Into<String>, mf: MembershipFunction) -> Self {
        Self {
            label: label.into(),
            mf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinguisticVariable {
    pub name: String,
    #[serde(default = "gray_domain")]
    pub domain: [f64; 2],
    pub terms: Vec<Term>,
}

fn gray_domain() -> [f64; 2] {
    GRAY_DOMAIN
}

impl LinguisticVariable {
    pub fn new(name: impl Into<String>, terms: Vec<Term>) -> Self {
        Self {
            name: name.into(),
            domain: GRAY_DOMAIN,
            terms,
        }
    }

    pub fn validate(&self) -> Result<(), FuzzyError> {
        let [lo, hi] = self.domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FuzzyError::InvalidParameters(format!(
                "variable `{}` has an empty domain [{lo}, {hi}]",
                self.name
            )));
        }
        if self.terms.is_empty() {
            return Err(FuzzyError::InvalidParameters(format!(
                "variable `{}` has no terms",
                self.name
            )));
        }
        for (i, term) in self.terms.iter().enumerate() {
            term.mf.validate()?;
            if self.terms[..i].iter().any(|t| t.label == term.label) {
                return Err(FuzzyError::InvalidParameters(format!(
                    "duplicate term `{}` in variable `{}`",
                    term.label, self.name
                )));
            }
            let (s0, s1) = term.mf.support();
            if s1 < lo || s0 > hi {
                return Err(FuzzyError::InvalidParameters(format!(
                    "term `{}` of `{}` lies outside the domain",
                    term.label, self.name
                )));
            }
        }
        Ok(())
    }

    pub fn term_index(&self, label: &str) -> Result<usize, FuzzyError> {
        self.terms
            .iter()
            .position(|t| t.label == label)
            .ok_or_else(|| FuzzyError::UnknownTermLabel {
                variable: self.name.clone(),
                label: label.to_string(),
            })
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.domain[0], self.domain[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connective {
    And,
    Or,
}

/// One antecedent clause: input `input` (0-based) is `term`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    pub input: usize,
    pub term: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRule {
    pub antecedent: Vec<Clause>,
    pub connective: Connective,
    pub consequent: String,
    pub weight: f64,
}

impl FuzzyRule {
    pub fn new(
        antecedent: impl IntoIterator<Item = (usize, &'static str)>,
        connective: Connective,
        consequent: &str,
    ) -> Self {
        Self {
            antecedent: antecedent
                .into_iter()
                .map(|(input, term)| Clause {
                    input,
                    term: term.to_string(),
                })
                .collect(),
            connective,
            consequent: consequent.to_string(),
            weight: 1.0,
        }
    }

    /// Parses the verbose rule form
    /// `if (input1 is mf1) and (input2 is mf2) then (output1 is mf1) [(weight)]`.
    pub fn parse(text: &str, inputs: &[&str], output: &str) -> Result<Self, FuzzyError> {
        let malformed = |reason: &str| FuzzyError::MalformedRule {
            rule: text.to_string(),
            reason: reason.to_string(),
        };
        let tokens = tokenize(text);
        let mut it = tokens.iter().map(String::as_str).peekable();

        if !it.next().is_some_and(|t| t.eq_ignore_ascii_case("if")) {
            return Err(malformed("expected `if`"));
        }
        let mut antecedent = Vec::new();
        let mut connective = None;
        loop {
            let (var, term) = parse_clause(&mut it).ok_or_else(|| malformed("bad clause"))?;
            let input = inputs
                .iter()
                .position(|n| *n == var)
                .ok_or_else(|| FuzzyError::UnknownVariable(var.to_string()))?;
            antecedent.push(Clause {
                input,
                term: term.to_string(),
            });
            match it.next() {
                Some(t) if t.eq_ignore_ascii_case("then") => break,
                Some(t) => {
                    let c = match t.to_ascii_lowercase().as_str() {
                        "and" => Connective::And,
                        "or" => Connective::Or,
                        _ => return Err(malformed("expected `and`, `or` or `then`")),
                    };
                    if connective.is_some_and(|prev| prev != c) {
                        return Err(malformed("mixed `and`/`or` in one rule"));
                    }
                    connective = Some(c);
                }
                None => return Err(malformed("missing `then`")),
            }
        }
        let (var, consequent) = parse_clause(&mut it).ok_or_else(|| malformed("bad consequent"))?;
        if var != output {
            return Err(FuzzyError::UnknownVariable(var.to_string()));
        }
        let weight = match it.next() {
            None => 1.0,
            Some("(") => {
                let w = it
                    .next()
                    .and_then(|w| w.parse::<f64>().ok())
                    .ok_or_else(|| malformed("bad weight"))?;
                if it.next() != Some(")") {
                    return Err(malformed("unclosed weight"));
                }
                w
            }
            Some(_) => return Err(malformed("trailing tokens")),
        };
        if it.next().is_some() {
            return Err(malformed("trailing tokens"));
        }
        Ok(Self {
            antecedent,
            connective: connective.unwrap_or(Connective::And),
            consequent: consequent.to_string(),
            weight,
        })
    }

    /// Renders the rule in the form accepted by [`FuzzyRule::parse`].
    pub fn render(&self, inputs: &[&str], output: &str) -> String {
        let joiner = match self.connective {
            Connective::And => " and ",
            Connective::Or => " or ",
        };
        let clauses: Vec<String> = self
            .antecedent
            .iter()
            .map(|c| {
                let name = inputs.get(c.input).copied().unwrap_or("?");
                format!("({name} is {})", c.term)
            })
            .collect();
        let mut s = format!(
            "if {} then ({output} is {})",
            clauses.join(joiner),
            self.consequent
        );
        if self.weight != 1.0 {
            s.push_str(&format!(" ({})", self.weight));
        }
        s
    }

    fn same_logic(&self, other: &Self) -> bool {
        self.antecedent == other.antecedent
            && self.connective == other.connective
            && self.consequent == other.consequent
    }
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch == '(' || ch == ')' || ch.is_whitespace() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if !ch.is_whitespace() {
                out.push(ch.to_string());
            }
        } else {
            cur.push(ch);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn parse_clause<'a>(
    it: &mut std::iter::Peekable<impl Iterator<Item = &'a str>>,
) -> Option<(&'a str, &'a str)> {
    let parens = it.peek() == Some(&"(");
    if parens {
        it.next();
    }
    let var = it.next()?;
    if !it.next()?.eq_ignore_ascii_case("is") {
        return None;
    }
    let term = it.next()?;
    if parens && it.next()? != ")" {
        return None;
    }
    Some((var, term))
}

/// Everything needed to build a [`MamdaniFis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisDescription {
    pub inputs: Vec<LinguisticVariable>,
    pub output: LinguisticVariable,
    pub rules: Vec<FuzzyRule>,
    pub defuzz_resolution: usize,
}

impl FisDescription {
    pub fn input_names(&self) -> Vec<&str> {
        self.inputs.iter().map(|v| v.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct CompiledRule {
    clauses: Vec<(usize, usize)>,
    connective: Connective,
    consequent: usize,
    weight: f64,
}

/// A validated, immutable Mamdani engine with two inputs and one output.
#[derive(Debug, Clone, PartialEq)]
pub struct MamdaniFis {
    inputs: [LinguisticVariable; 2],
    output: LinguisticVariable,
    rules: Vec<FuzzyRule>,
    compiled: Vec<CompiledRule>,
    defuzz_resolution: usize,
    duplicates_removed: usize,
    grid: Vec<f64>,
    // output term degrees sampled on `grid`, one row per term
    output_samples: Vec<Vec<f64>>,
}

pub fn build_fis(desc: &FisDescription) -> Result<MamdaniFis, FuzzyError> {
    MamdaniFis::new(desc)
}

impl MamdaniFis {
    pub fn new(desc: &FisDescription) -> Result<Self, FuzzyError> {
        let [in1, in2]: [LinguisticVariable; 2] =
            desc.inputs.clone().try_into().map_err(|v: Vec<_>| {
                FuzzyError::InvalidParameters(format!("expected 2 inputs, got {}", v.len()))
            })?;
        in1.validate()?;
        in2.validate()?;
        desc.output.validate()?;
        if desc.defuzz_resolution < 2 {
            return Err(FuzzyError::InvalidParameters(format!(
                "defuzz_resolution must be >= 2, got {}",
                desc.defuzz_resolution
            )));
        }
        if desc.rules.is_empty() {
            return Err(FuzzyError::EmptyRuleBase);
        }

        let inputs = [in1, in2];
        let mut rules: Vec<FuzzyRule> = Vec::with_capacity(desc.rules.len());
        let mut compiled: Vec<CompiledRule> = Vec::with_capacity(desc.rules.len());
        let mut duplicates_removed = 0;
        for rule in &desc.rules {
            if !(rule.weight > 0.0 && rule.weight <= 1.0) {
                return Err(FuzzyError::InvalidParameters(format!(
                    "rule weight {} outside (0, 1]",
                    rule.weight
                )));
            }
            if rule.antecedent.is_empty() {
                return Err(FuzzyError::InvalidParameters(
                    "rule without antecedent".into(),
                ));
            }
            let mut clauses = Vec::with_capacity(rule.antecedent.len());
            for clause in &rule.antecedent {
                let var = inputs.get(clause.input).ok_or_else(|| {
                    FuzzyError::UnknownVariable(format!("input index {}", clause.input))
                })?;
                clauses.push((clause.input, var.term_index(&clause.term)?));
            }
            let consequent = desc.output.term_index(&rule.consequent)?;

            if let Some(k) = rules.iter().position(|r| r.same_logic(rule)) {
                duplicates_removed += 1;
                if rule.weight > rules[k].weight {
                    rules[k].weight = rule.weight;
                    compiled[k] = CompiledRule {
                        weight: rule.weight,
                        ..compiled[k].clone()
                    };
                }
                continue;
            }
            rules.push(rule.clone());
            compiled.push(CompiledRule {
                clauses,
                connective: rule.connective,
                consequent,
                weight: rule.weight,
            });
        }

        let grid = uniform_grid(desc.output.domain, desc.defuzz_resolution);
        let output_samples = desc
            .output
            .terms
            .iter()
            .map(|t| grid.iter().map(|&x| t.mf.degree(x)).collect())
            .collect();

        Ok(Self {
            inputs,
            output: desc.output.clone(),
            rules,
            compiled,
            defuzz_resolution: desc.defuzz_resolution,
            duplicates_removed,
            grid,
            output_samples,
        })
    }

    pub fn inputs(&self) -> &[LinguisticVariable; 2] {
        &self.inputs
    }

    pub fn output(&self) -> &LinguisticVariable {
        &self.output
    }

    /// Rules after duplicate removal.
    pub fn rules(&self) -> &[FuzzyRule] {
        &self.rules
    }

    pub fn duplicates_removed(&self) -> usize {
        self.duplicates_removed
    }

    pub fn defuzz_resolution(&self) -> usize {
        self.defuzz_resolution
    }

    pub fn rule_texts(&self) -> Vec<String> {
        let names = [self.inputs[0].name.as_str(), self.inputs[1].name.as_str()];
        self.rules
            .iter()
            .map(|r| r.render(&names, &self.output.name))
            .collect()
    }

    /// Firing strength of every rule, weight applied.
    pub fn firing_strengths(&self, x1: f64, x2: f64) -> Vec<f64> {
        let xs = [self.inputs[0].clamp(x1), self.inputs[1].clamp(x2)];
        self.compiled
            .iter()
            .map(|rule| {
                let degrees = rule
                    .clauses
                    .iter()
                    .map(|&(input, term)| self.inputs[input].terms[term].mf.degree(xs[input]));
                let strength = match rule.connective {
                    Connective::And => degrees.fold(1.0, f64::min),
                    Connective::Or => degrees.fold(0.0, f64::max),
                };
                strength * rule.weight
            })
            .collect()
    }

    /// Aggregated output curve sampled on the defuzzification grid.
    pub fn aggregate(&self, x1: f64, x2: f64) -> Vec<f64> {
        let strengths = self.firing_strengths(x1, x2);
        let mut agg = vec![0.0f64; self.grid.len()];
        for (rule, &w) in self.compiled.iter().zip(&strengths) {
            if w <= 0.0 {
                continue;
            }
            for (a, &mu) in agg.iter_mut().zip(&self.output_samples[rule.consequent]) {
                *a = a.max(mu.min(w));
            }
        }
        agg
    }

    /// Strict inference: fails with `ZeroActivation` when no rule fires.
    pub fn infer(&self, x1: f64, x2: f64) -> Result<f64, FuzzyError> {
        let agg = self.aggregate(x1, x2);
        let (num, den) = self
            .grid
            .iter()
            .zip(&agg)
            .fold((0.0, 0.0), |(n, d), (&x, &mu)| (n + x * mu, d + mu));
        if den > 0.0 {
            Ok((num / den).clamp(self.output.domain[0], self.output.domain[1]))
        } else {
            Err(FuzzyError::ZeroActivation(x1, x2))
        }
    }

    /// Crisp output; falls back to the mean of the two inputs when no rule
    /// fires.
    pub fn evaluate(&self, x1: f64, x2: f64) -> f64 {
        self.evaluate_flagged(x1, x2).0
    }

    /// Like [`evaluate`](Self::evaluate), also reporting whether the fallback
    /// was used.
    pub fn evaluate_flagged(&self, x1: f64, x2: f64) -> (f64, bool) {
        match self.infer(x1, x2) {
            Ok(v) => (v, false),
            Err(_) => {
                let mean = 0.5 * (self.inputs[0].clamp(x1) + self.inputs[1].clamp(x2));
                (
                    mean.clamp(self.output.domain[0], self.output.domain[1]),
                    true,
                )
            }
        }
    }

    pub fn evaluate_lut(&self) -> FuzzyLut {
        FuzzyLut::build(self)
    }
}

fn uniform_grid([lo, hi]: [f64; 2], n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Crisp outputs for every pair of 8-bit inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyLut {
    table: Vec<f64>,
    fallback: Vec<bool>,
}

impl FuzzyLut {
    pub fn build(fis: &MamdaniFis) -> Self {
        let rows: Vec<(Vec<f64>, Vec<bool>)> = (0..256usize)
            .into_par_iter()
            .map(|i| {
                (0..256usize)
                    .map(|j| fis.evaluate_flagged(i as f64, j as f64))
                    .unzip()
            })
            .collect();
        let mut table = Vec::with_capacity(256 * 256);
        let mut fallback = Vec::with_capacity(256 * 256);
        for (t, f) in rows {
            table.extend(t);
            fallback.extend(f);
        }
        Self { table, fallback }
    }

    pub fn get(&self, x1: u8, x2: u8) -> f64 {
        self.table[usize::from(x1) * 256 + usize::from(x2)]
    }

    /// Whether the zero-activation fallback produced this entry.
    pub fn is_fallback(&self, x1: u8, x2: u8) -> bool {
        self.fallback[usize::from(x1) * 256 + usize::from(x2)]
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.table
    }
}

/// Three evenly spaced triangular terms `mf1..mf3` over `[0, 255]`, peaked at
/// 0, 127.5 and 255, each spanning half the domain.
pub fn default_terms() -> Vec<Term> {
    let half = 127.5;
    (0..3)
        .map(|k| {
            let peak = half * k as f64;
            Term::new(
                format!("mf{}", k + 1),
                MembershipFunction::Triangular {
                    a: peak - half,
                    b: peak,
                    c: peak + half,
                },
            )
        })
        .collect()
}

/// The six fusion rules, including the repeated second rule.
pub fn listed_rules() -> Vec<FuzzyRule> {
    use Connective::{And, Or};
    vec![
        FuzzyRule::new([(0, "mf1"), (1, "mf2")], And, "mf1"),
        FuzzyRule::new([(0, "mf2"), (1, "mf2")], And, "mf2"),
        FuzzyRule::new([(0, "mf2"), (1, "mf2")], And, "mf2"),
        FuzzyRule::new([(0, "mf3"), (1, "mf2")], Or, "mf3"),
        FuzzyRule::new([(0, "mf1"), (1, "mf3")], And, "mf1"),
        FuzzyRule::new([(0, "mf3"), (1, "mf3")], Or, "mf2"),
    ]
}

pub fn default_description() -> FisDescription {
    FisDescription {
        inputs: vec![
            LinguisticVariable::new("input1", default_terms()),
            LinguisticVariable::new("input2", default_terms()),
        ],
        output: LinguisticVariable::new("output1", default_terms()),
        rules: listed_rules(),
        defuzz_resolution: DEFAULT_DEFUZZ_RESOLUTION,
    }
}

/// Default variables `[input1, input2, output1]` and the deduplicated rules.
pub fn default_rule_base() -> (Vec<LinguisticVariable>, Vec<FuzzyRule>) {
    let desc = default_description();
    let fis = MamdaniFis::new(&desc).expect("default description is valid");
    let mut vars = desc.inputs;
    vars.push(desc.output);
    (vars, fis.rules().to_vec())
}

impl fmt::Display for MamdaniFis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "mamdani: {} x {} terms -> {} terms, {} rules, resolution {}",
            self.inputs[0].terms.len(),
            self.inputs[1].terms.len(),
            self.output.terms.len(),
            self.rules.len(),
            self.defuzz_resolution
        )?;
        for text in self.rule_texts() {
            writeln!(f, "  {text}")?;
        }
        Ok(())
    }
}

//! Method names as written on the command line and in result files, e.g.
//! `FD`, `Lars(p=3)`, `SIS-MASS`, `MFSS(xi=0.3,lambda=5)`, `PCA-SIS-Lars`.

use std::fmt;
use std::str::FromStr;

use mass::ReductionKind;

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodKind {
    /// Classifier on all (preliminarily reduced) predictors.
    Fd,
    /// First `p` predictors to enter the LARS path.
    Lars,
    /// Top `p` principal components.
    Pca,
    /// Top `p` predictors by marginal correlation.
    Sis,
    Mass,
    Mfss,
}

impl MethodKind {
    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::Fd => "FD",
            MethodKind::Lars => "Lars",
            MethodKind::Pca => "PCA",
            MethodKind::Sis => "SIS",
            MethodKind::Mass => "MASS",
            MethodKind::Mfss => "MFSS",
        }
    }

    pub fn is_search(&self) -> bool {
        matches!(self, MethodKind::Mass | MethodKind::Mfss)
    }

    /// Baselines that take a target dimension and can be swept over it.
    pub fn is_sweepable(&self) -> bool {
        matches!(self, MethodKind::Lars | MethodKind::Pca | MethodKind::Sis)
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "fd" => MethodKind::Fd,
            "lars" => MethodKind::Lars,
            "pca" => MethodKind::Pca,
            "sis" => MethodKind::Sis,
            "mass" => MethodKind::Mass,
            "mfss" => MethodKind::Mfss,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    /// Preliminary reduction written as a prefix; `None` defers to the
    /// experiment-wide setting.
    pub reduction: Option<ReductionKind>,
    pub kind: MethodKind,
    pub p: Option<usize>,
    /// Fixed sparsity for MFSS.
    pub xi: Option<f64>,
    /// Curvature budget; selects the spline variant for MASS and MFSS.
    pub lambda: Option<f64>,
    /// Sweep the target dimension (baselines only).
    pub sweep: bool,
}

impl MethodSpec {
    pub fn new(kind: MethodKind) -> Self {
        Self {
            reduction: None,
            kind,
            p: None,
            xi: None,
            lambda: None,
            sweep: false,
        }
    }

    /// Canonical label, stable across runs; used in result files.
    pub fn label(&self) -> String {
        let mut out = String::new();
        if let Some(r) = self.reduction {
            if r != ReductionKind::None {
                out.push_str(match r {
                    ReductionKind::Pca => "PCA-",
                    ReductionKind::Sis => "SIS-",
                    ReductionKind::PcaSis => "PCA-SIS-",
                    ReductionKind::None => "",
                });
            }
        }
        out.push_str(self.kind.name());
        let mut args = Vec::new();
        if let Some(p) = self.p {
            args.push(format!("p={p}"));
        }
        if let Some(xi) = self.xi {
            args.push(format!("xi={xi}"));
        }
        if let Some(l) = self.lambda {
            args.push(format!("lambda={l}"));
        }
        if self.sweep {
            args.push("sweep".into());
        }
        if !args.is_empty() {
            out.push('(');
            out.push_str(&args.join(","));
            out.push(')');
        }
        out
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for MethodSpec {
    type Err = HarnessError;

    fn from_str(raw: &str) -> Result<Self, HarnessError> {
        let bad = |why: &str| HarnessError::Method(format!("'{raw}': {why}"));
        let s = raw.trim();
        let (head, args) = match s.find('(') {
            Some(i) => {
                let inner = s[i + 1..].strip_suffix(')').ok_or_else(|| bad("missing ')'"))?;
                (&s[..i], Some(inner))
            }
            None => (s, None),
        };
        let parts: Vec<&str> = head.split('-').map(str::trim).collect();
        let (name, prefix) = parts.split_last().ok_or_else(|| bad("empty name"))?;
        let kind = MethodKind::parse(name).ok_or_else(|| bad("unknown method"))?;
        let reduction = if prefix.is_empty() {
            None
        } else {
            Some(
                prefix
                    .join("_")
                    .parse::<ReductionKind>()
                    .map_err(|_| bad("unknown reduction prefix"))?,
            )
        };
        let mut spec = MethodSpec {
            reduction,
            ..MethodSpec::new(kind)
        };
        for arg in args.into_iter().flat_map(|a| a.split(',')).map(str::trim).filter(|a| !a.is_empty()) {
            let (key, value) = match arg.split_once('=') {
                Some((k, v)) => (k.trim().to_ascii_lowercase(), v.trim()),
                None => (arg.to_ascii_lowercase(), ""),
            };
            let num = || value.parse::<f64>().map_err(|_| bad(&format!("'{value}' is not a number")));
            match key.as_str() {
                "p" if value == "*" || value == "sweep" => spec.sweep = true,
                "p" => spec.p = Some(value.parse().map_err(|_| bad("p must be a positive integer"))?),
                "xi" => spec.xi = Some(num()?),
                "lambda" => spec.lambda = Some(num()?),
                "sweep" => spec.sweep = true,
                other if value.is_empty() && kind == MethodKind::Mfss => {
                    // `MFSS(0.98)` shorthand
                    spec.xi = Some(other.parse().map_err(|_| bad("unknown argument"))?);
                }
                _ => return Err(bad(&format!("unknown argument '{key}'"))),
            }
        }
        if spec.sweep && !kind.is_sweepable() {
            return Err(bad("only Lars, PCA and SIS can sweep p"));
        }
        if spec.xi.is_some() && kind != MethodKind::Mfss {
            return Err(bad("xi applies to MFSS only"));
        }
        if spec.lambda.is_some() && !kind.is_search() {
            return Err(bad("lambda applies to MASS and MFSS only"));
        }
        if let Some(xi) = spec.xi {
            if !(0.0..=1.0).contains(&xi) {
                return Err(bad("xi must lie in [0, 1]"));
            }
        }
        if spec.p == Some(0) {
            return Err(bad("p must be at least 1"));
        }
        Ok(spec)
    }
}

/// Splits a comma-separated method list, ignoring commas inside parentheses.
pub fn split_methods(list: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for c in list.chars() {
        match c {
            '(' => {
                depth += 1;
                cur.push(c);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                cur.push(c);
            }
            ',' if depth == 0 => {
                if !cur.trim().is_empty() {
                    out.push(cur.trim().to_string());
                }
                cur.clear();
            }
            _ => cur.push(c),
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

pub fn parse_methods(list: &[String]) -> Result<Vec<MethodSpec>, HarnessError> {
    let specs: Vec<MethodSpec> = list
        .iter()
        .flat_map(|s| split_methods(s))
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    let mut seen = std::collections::BTreeSet::new();
    for s in &specs {
        if !seen.insert(s.label()) {
            return Err(HarnessError::Method(format!("method '{}' listed twice", s.label())));
        }
    }
    Ok(specs)
}

//! Experiment configuration in flat `key=value` text; grids repeat their key.

use super::HarnessError;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExperimentKind {
    PhaseDiagram,
    OdeCurve,
    MleVsOde,
    LdCheck,
    BridgeCheck,
    CyclefindDemo,
    PosteriorOracle,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::PhaseDiagram,
        ExperimentKind::OdeCurve,
        ExperimentKind::MleVsOde,
        ExperimentKind::LdCheck,
        ExperimentKind::BridgeCheck,
        ExperimentKind::CyclefindDemo,
        ExperimentKind::PosteriorOracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::PhaseDiagram => "phase_diagram",
            ExperimentKind::OdeCurve => "ode_curve",
            ExperimentKind::MleVsOde => "mle_vs_ode",
            ExperimentKind::LdCheck => "ld_check",
            ExperimentKind::BridgeCheck => "bridge_check",
            ExperimentKind::CyclefindDemo => "cyclefind_demo",
            ExperimentKind::PosteriorOracle => "posterior_oracle",
        }
    }

    /// Whether the kind sweeps over instance sizes.
    pub fn uses_sizes(self) -> bool {
        matches!(
            self,
            ExperimentKind::PhaseDiagram
                | ExperimentKind::MleVsOde
                | ExperimentKind::CyclefindDemo
                | ExperimentKind::PosteriorOracle
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == t)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment kind '{s}'")))
    }
}

/// One experiment. `model` is `unweighted`, `exponential`, `sparse(<p>,<q>)`
/// or `dense(<p>,<rho>)`; `param` is the mean degree, or the planted rate for
/// the exponential model. Kind-specific knobs live in `options`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: String,
    pub n: Vec<usize>,
    pub param: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: Option<String>,
    pub options: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, model: &str) -> Self {
        ExperimentConfig {
            kind,
            model: model.to_string(),
            n: Vec::new(),
            param: Vec::new(),
            trials: 1,
            seed: 0,
            workers: None,
            out: None,
            options: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.param.is_empty() {
            return bad(format!("{}: param grid is empty", self.kind));
        }
        if self.kind.uses_sizes() && self.n.is_empty() {
            return bad(format!("{}: n grid is empty", self.kind));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        if self.param.iter().any(|p| !p.is_finite()) {
            return bad("param values must be finite".into());
        }
        Ok(())
    }

    /// Typed lookup of an option with a default.
    pub fn option<T: FromStr>(&self, key: &str, default: T) -> Result<T, HarnessError> {
        match self.options.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| HarnessError::Config(format!("option {key}: cannot parse '{v}'"))),
        }
    }

    pub fn to_text(&self) -> String {
        let mut lines = vec![format!("kind={}", self.kind), format!("model={}", self.model)];
        lines.extend(self.n.iter().map(|n| format!("n={n}")));
        lines.extend(self.param.iter().map(|p| format!("param={p:?}")));
        lines.push(format!("trials={}", self.trials));
        lines.push(format!("seed={}", self.seed));
        if let Some(w) = self.workers {
            lines.push(format!("workers={w}"));
        }
        if let Some(o) = &self.out {
            lines.push(format!("out={o}"));
        }
        lines.extend(self.options.iter().map(|(k, v)| format!("{k}={v}")));
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut kind = None;
        let mut cfg = ExperimentConfig::new(ExperimentKind::PhaseDiagram, "unweighted");
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: &str| HarnessError::Config(format!("line {}: {m}", k + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key=value"))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |what: &str| err(&format!("invalid {what} '{value}'"));
            match key {
                "kind" => kind = Some(value.parse::<ExperimentKind>().map_err(|_| num("kind"))?),
                "model" => cfg.model = value.to_string(),
                "n" => cfg.n.push(value.parse().map_err(|_| num("n"))?),
                "param" => cfg.param.push(value.parse().map_err(|_| num("param"))?),
                "trials" => cfg.trials = value.parse().map_err(|_| num("trials"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| num("seed"))?,
                "workers" => cfg.workers = Some(value.parse().map_err(|_| num("workers"))?),
                "out" => cfg.out = Some(value.to_string()),
                _ => {
                    if cfg.options.insert(key.to_string(), value.to_string()).is_some() {
                        return Err(err(&format!("duplicate option '{key}'")));
                    }
                }
            }
        }
        cfg.kind = kind.ok_or_else(|| HarnessError::Config("missing kind".into()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip() {
        let mut c = ExperimentConfig::new(ExperimentKind::MleVsOde, "exponential");
        c.n = vec![500, 1000];
        c.param = vec![2.0, 0.1 + 0.2, 3.9];
        c.trials = 50;
        c.seed = u64::MAX;
        c.workers = Some(8);
        c.out = Some("out/x.csv".into());
        c.options.insert("tol".into(), "1e-10".into());
        let back = ExperimentConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), c.to_text());
    }

    #[test]
    fn rejects_invalid() {
        assert!(ExperimentConfig::parse("kind=phase_diagram\nmodel=unweighted\nparam=1\n").is_err());
        assert!(ExperimentConfig::parse("kind=phase_diagram\nn=10\nparam=1\ntrials=0\n").is_err());
        assert!(ExperimentConfig::parse("kind=nope\nn=10\nparam=1\n").is_err());
        assert!(ExperimentConfig::parse("kind=ode_curve\nparam\n").is_err());
        assert!(ExperimentConfig::parse("model=unweighted\nn=10\nparam=1\n").is_err());
        let ok = ExperimentConfig::parse("# comment\nkind=ode_curve\nparam=2\n").unwrap();
        assert_eq!(ok.kind, ExperimentKind::OdeCurve);
    }
}

//! Flat key=value experiment configuration: one `key = value` per line,
//! `#` comments, repeated `atom = lambda,weight` lines, comma lists for
//! arrays, repeated `xi = ...` lines for frequency lists.

use avgwave::covariance::SchoenbergMeasure;
use avgwave::pde::TorusGrid;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Experiment {
    FieldStats,
    Intersection,
    MeanXtau,
    FkVsPde,
    CompareRoutes,
    Homogenize,
    DuhamelCheck,
}

impl Experiment {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "field-stats" => Experiment::FieldStats,
            "intersection" => Experiment::Intersection,
            "mean-xtau" => Experiment::MeanXtau,
            "fk-vs-pde" => Experiment::FkVsPde,
            "compare-routes" => Experiment::CompareRoutes,
            "homogenize" => Experiment::Homogenize,
            "duhamel-check" => Experiment::DuhamelCheck,
            _ => return None,
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Experiment::FieldStats => "field-stats",
            Experiment::Intersection => "intersection",
            Experiment::MeanXtau => "mean-xtau",
            Experiment::FkVsPde => "fk-vs-pde",
            Experiment::CompareRoutes => "compare-routes",
            Experiment::Homogenize => "homogenize",
            Experiment::DuhamelCheck => "duhamel-check",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub dim: usize,
    /// (lambda, weight) pairs.
    pub atoms: Vec<(f64, f64)>,
    pub eps_list: Vec<f64>,
    pub t: f64,
    pub xi_list: Vec<Vec<f64>>,
    pub tau_list: Vec<f64>,
    pub couplings: Vec<f64>,
    pub center: Option<Vec<f64>>,
    pub width: f64,
    pub wavevector: Option<Vec<f64>>,
    pub n_paths: usize,
    pub n_fields: usize,
    pub n_steps: usize,
    pub grid_n: usize,
    pub box_l: f64,
    pub dt: Option<f64>,
    pub moll_eps: Option<f64>,
    pub seed: u64,
    /// Treat a variance blow-up flag as a failure (exit code 3).
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: Experiment::MeanXtau,
            dim: 1,
            atoms: vec![(1.0, 1.0)],
            eps_list: vec![0.25],
            t: 0.25,
            xi_list: vec![],
            tau_list: vec![1e-4],
            couplings: vec![0.4, 0.2, 0.1],
            center: None,
            width: 0.5,
            wavevector: None,
            n_paths: 10_000,
            n_fields: 100,
            n_steps: 4096,
            grid_n: 256,
            box_l: 16.0,
            dt: None,
            moll_eps: None,
            seed: 1,
            strict: false,
        }
    }
}

fn parse_f64_list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad number '{s}': {e}")))
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::default();
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut atoms_seen = false;
        let mut xi_list: Vec<Vec<f64>> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            let err = |e: String| format!("line {}: {e}", lineno + 1);
            match key {
                "experiment" => {
                    cfg.experiment = Experiment::parse(value)
                        .ok_or_else(|| err(format!("unknown experiment '{value}'")))?;
                }
                "dim" => cfg.dim = value.parse().map_err(|e| err(format!("{e}")))?,
                "atom" => {
                    let pair = parse_f64_list(value).map_err(err)?;
                    if pair.len() != 2 {
                        return Err(err("atom needs 'lambda,weight'".into()));
                    }
                    atoms_seen = true;
                    atoms.push((pair[0], pair[1]));
                }
                "zero_measure" => {
                    if value.parse::<bool>().map_err(|e| err(format!("{e}")))? {
                        atoms_seen = true;
                        atoms.clear();
                    }
                }
                "eps" => cfg.eps_list = parse_f64_list(value).map_err(err)?,
                "t" => cfg.t = value.parse().map_err(|e| err(format!("{e}")))?,
                "xi" => xi_list.push(parse_f64_list(value).map_err(err)?),
                "tau" => cfg.tau_list = parse_f64_list(value).map_err(err)?,
                "couplings" => cfg.couplings = parse_f64_list(value).map_err(err)?,
                "center" => cfg.center = Some(parse_f64_list(value).map_err(err)?),
                "width" => cfg.width = value.parse().map_err(|e| err(format!("{e}")))?,
                "wavevector" => cfg.wavevector = Some(parse_f64_list(value).map_err(err)?),
                "n_paths" => cfg.n_paths = value.parse().map_err(|e| err(format!("{e}")))?,
                "n_fields" => cfg.n_fields = value.parse().map_err(|e| err(format!("{e}")))?,
                "n_steps" => cfg.n_steps = value.parse().map_err(|e| err(format!("{e}")))?,
                "grid_n" => cfg.grid_n = value.parse().map_err(|e| err(format!("{e}")))?,
                "box_l" => cfg.box_l = value.parse().map_err(|e| err(format!("{e}")))?,
                "dt" => cfg.dt = Some(value.parse().map_err(|e| err(format!("{e}")))?),
                "moll_eps" => cfg.moll_eps = Some(value.parse().map_err(|e| err(format!("{e}")))?),
                "seed" => cfg.seed = value.parse().map_err(|e| err(format!("{e}")))?,
                "strict" => cfg.strict = value.parse().map_err(|e| err(format!("{e}")))?,
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        if atoms_seen {
            cfg.atoms = atoms;
        }
        if !xi_list.is_empty() {
            cfg.xi_list = xi_list;
        }
        Ok(cfg)
    }

    pub fn measure(&self) -> Result<SchoenbergMeasure, avgwave::Error> {
        if self.atoms.is_empty() {
            Ok(SchoenbergMeasure::zero())
        } else {
            SchoenbergMeasure::new(self.atoms.clone())
        }
    }

    pub fn effective_xi_list(&self) -> Vec<Vec<f64>> {
        if self.xi_list.is_empty() {
            vec![vec![0.0; self.dim]]
        } else {
            self.xi_list.clone()
        }
    }

    fn uses_pde(&self) -> bool {
        matches!(
            self.experiment,
            Experiment::FieldStats | Experiment::FkVsPde | Experiment::CompareRoutes | Experiment::Homogenize
        )
    }

    fn uses_paths(&self) -> bool {
        matches!(
            self.experiment,
            Experiment::Intersection
                | Experiment::FkVsPde
                | Experiment::CompareRoutes
                | Experiment::DuhamelCheck
        )
    }

    /// Every precondition violated by this configuration; empty iff a run
    /// would start.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.dim != 1 && self.dim != 2 {
            v.push(format!("dim must be 1 or 2, got {}", self.dim));
        }
        for &(l, w) in &self.atoms {
            if !(l > 0.0) || !(w > 0.0) {
                v.push(format!("atom ({l},{w}): lambda and weight must be > 0"));
            }
        }
        if !(self.t > 0.0) {
            v.push(format!("t must be > 0, got {}", self.t));
        }
        if self.eps_list.is_empty() || self.eps_list.iter().any(|&e| !(e > 0.0)) {
            v.push("eps list must be nonempty with positive entries".into());
        }
        if self.experiment == Experiment::Homogenize {
            if self.dim != 2 {
                v.push("homogenize requires dim = 2".into());
            }
            if self.eps_list.iter().any(|&e| e >= 1.0) {
                v.push("homogenize requires eps < 1".into());
            }
        }
        for xi in &self.xi_list {
            if xi.len() != self.dim {
                v.push(format!("xi {:?} does not match dim {}", xi, self.dim));
            }
        }
        if self.experiment == Experiment::Intersection && self.dim != 1 {
            v.push("intersection requires dim = 1 (local time)".into());
        }
        if self.uses_paths() {
            if self.n_steps == 0 {
                v.push("sample_path requires n_steps >= 1".into());
            }
            if self.n_paths < 2 {
                v.push("ensembles require n_paths >= 2".into());
            }
        }
        if let Some(m) = self.moll_eps {
            if !(m > 0.0) {
                v.push(format!("moll_eps must be > 0, got {m}"));
            }
        }
        if self.uses_pde() {
            match TorusGrid::new(self.dim, self.grid_n, self.box_l) {
                Err(e) => v.push(format!("grid: {e}")),
                Ok(grid) => {
                    let max_lambda = self
                        .atoms
                        .iter()
                        .map(|&(l, _)| l)
                        .fold(0.0_f64, f64::max);
                    if max_lambda > 0.0 {
                        for &eps in &self.eps_list {
                            let limit = eps / (4.0 * max_lambda);
                            if grid.spacing() > limit {
                                v.push(format!(
                                    "potential sampling: grid spacing {} exceeds eps/(4 max lambda) = {limit} at eps = {eps}",
                                    grid.spacing()
                                ));
                            }
                        }
                    }
                }
            }
            if self.n_fields < 2 {
                v.push("ensembles require n_fields >= 2".into());
            }
            if let Some(dt) = self.dt {
                if !(dt > 0.0) {
                    v.push(format!("dt must be > 0, got {dt}"));
                }
            }
        }
        if self.experiment == Experiment::DuhamelCheck {
            if self.couplings.is_empty()
                || self.couplings.iter().any(|&c| !(c > 0.0))
                || self.couplings.windows(2).any(|w| w[1] >= w[0])
            {
                v.push("couplings must be positive and strictly decreasing".into());
            }
            if self.eps_list.len() != 1 {
                v.push("duhamel-check uses exactly one eps".into());
            }
        }
        if self.experiment == Experiment::MeanXtau
            && self.tau_list.iter().any(|&tau| !(tau > 0.0))
        {
            v.push("tau values must be > 0".into());
        }
        if !(self.width > 0.0) {
            v.push(format!("profile width must be > 0, got {}", self.width));
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = "\
# benchmark
experiment = fk-vs-pde
dim = 1
atom = 1, 1
eps = 0.25
t = 0.25
xi = 0
xi = 1
n_paths = 500
n_fields = 50
n_steps = 256
grid_n = 2048
box_l = 40
seed = 42
";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.experiment, Experiment::FkVsPde);
        assert_eq!(cfg.atoms, vec![(1.0, 1.0)]);
        assert_eq!(cfg.xi_list, vec![vec![0.0], vec![1.0]]);
        assert_eq!(cfg.seed, 42);
        assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(RunConfig::parse("experiment fk-vs-pde").is_err());
        assert!(RunConfig::parse("experiment = nope").is_err());
        assert!(RunConfig::parse("atom = 1").is_err());
        assert!(RunConfig::parse("mystery = 3").is_err());
    }

    #[test]
    fn validation_catches_preconditions() {
        let mut cfg = RunConfig::parse("experiment = fk-vs-pde\nn_steps = 0").unwrap();
        cfg.grid_n = 16;
        let violations = cfg.validate();
        assert!(violations.iter().any(|v| v.contains("n_steps")));
        assert!(
            violations.iter().any(|v| v.contains("eps/(4 max lambda)")),
            "{violations:?}"
        );

        let cfg = RunConfig::parse("experiment = homogenize\ndim = 1").unwrap();
        assert!(cfg.validate().iter().any(|v| v.contains("dim = 2")));
    }

    #[test]
    fn zero_measure_and_defaults() {
        let cfg = RunConfig::parse("experiment = mean-xtau\nzero_measure = true").unwrap();
        assert!(cfg.measure().unwrap().is_zero());
        assert_eq!(cfg.effective_xi_list(), vec![vec![0.0]]);
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.atoms, vec![(1.0, 1.0)]);
    }
}

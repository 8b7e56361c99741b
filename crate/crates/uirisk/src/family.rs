//! Indexed collections of laws, the object the uniform-integrability
//! diagnostics run over. Members are stored explicitly or produced by a
//! deterministic generator over indices 1..=horizon.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::dist::DiscreteDistribution;
use crate::error::{Error, Result};

type Generator = Arc<dyn Fn(usize) -> DiscreteDistribution + Send + Sync>;

#[derive(Clone)]
enum Members {
    Explicit(Vec<DiscreteDistribution>),
    Generated(Generator),
}

#[derive(Clone)]
pub struct DistributionFamily {
    label: String,
    horizon: usize,
    members: Members,
}

impl fmt::Debug for DistributionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.members {
            Members::Explicit(_) => "explicit",
            Members::Generated(_) => "generated",
        };
        write!(
            f,
            "DistributionFamily({:?}, {} members, {kind})",
            self.label, self.horizon
        )
    }
}

impl DistributionFamily {
    pub fn explicit(label: impl Into<String>, members: Vec<DiscreteDistribution>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyFamily);
        }
        Ok(DistributionFamily {
            label: label.into(),
            horizon: members.len(),
            members: Members::Explicit(members),
        })
    }

    pub fn single(label: impl Into<String>, law: DiscreteDistribution) -> Self {
        Self::explicit(label, vec![law]).expect("one member")
    }

    /// `gen` must be pure: the member at index `n` is `gen(n)`, n in
    /// 1..=horizon, and repeated calls must agree.
    pub fn generated(
        label: impl Into<String>,
        horizon: usize,
        gen: impl Fn(usize) -> DiscreteDistribution + Send + Sync + 'static,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::EmptyFamily);
        }
        Ok(DistributionFamily {
            label: label.into(),
            horizon,
            members: Members::Generated(Arc::new(gen)),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Member at index `n` in 1..=horizon.
    pub fn member(&self, n: usize) -> DiscreteDistribution {
        assert!(
            n >= 1 && n <= self.horizon,
            "family index {n} outside 1..={}",
            self.horizon
        );
        match &self.members {
            Members::Explicit(v) => v[n - 1].clone(),
            Members::Generated(g) => g(n),
        }
    }

    /// Same family seen up to a shorter (or, for generated families, longer)
    /// horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::EmptyFamily);
        }
        let members = match &self.members {
            Members::Explicit(v) => {
                if horizon > v.len() {
                    return Err(Error::BadParameter(format!(
                        "horizon {horizon} beyond the {} stored members",
                        v.len()
                    )));
                }
                Members::Explicit(v[..horizon].to_vec())
            }
            Members::Generated(g) => Members::Generated(g.clone()),
        };
        Ok(DistributionFamily {
            label: self.label.clone(),
            horizon,
            members,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = DiscreteDistribution> + '_ {
        (1..=self.horizon).map(|n| self.member(n))
    }

    /// The family `{n · Bernoulli(1/n)}`: atoms `{0, n}` with weights
    /// `{1 − 1/n, 1/n}`. Integrable with mean 1 at every index, but not
    /// uniformly integrable; the standard stress case.
    pub fn n_bernoulli(horizon: usize) -> Result<Self> {
        Self::generated("n_bernoulli", horizon, |n| {
            if n == 1 {
                DiscreteDistribution::singleton(1.0).unwrap()
            } else {
                let nf = n as f64;
                DiscreteDistribution::from_pairs(&[(0.0, 1.0 - 1.0 / nf), (nf, 1.0 / nf)])
                    .unwrap()
            }
        })
    }

    /// Every `*.csv` file in `dir` becomes one member, in file-name order.
    pub fn from_csv_dir(dir: &Path) -> Result<Self> {
        let label = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
            .collect();
        paths.sort();
        let mut members = Vec::with_capacity(paths.len());
        for p in &paths {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?;
            members.push(DiscreteDistribution::from_csv(&text)?);
        }
        Self::explicit(label, members)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_bernoulli_members() {
        let fam = DistributionFamily::n_bernoulli(100).unwrap();
        assert_eq!(fam.horizon(), 100);
        let x10 = fam.member(10);
        assert_eq!(x10.atoms(), &[0.0, 10.0]);
        assert!((x10.mean() - 1.0).abs() < 1e-14);
        let x1 = fam.member(1);
        assert_eq!(x1.atoms(), &[1.0]);
        // generator determinism
        assert_eq!(fam.member(7), fam.member(7));
    }

    #[test]
    fn horizon_adjustment() {
        let fam = DistributionFamily::n_bernoulli(10).unwrap();
        let wide = fam.with_horizon(1000).unwrap();
        assert_eq!(wide.horizon(), 1000);
        assert_eq!(wide.member(900).atoms()[1], 900.0);

        let laws = vec![
            DiscreteDistribution::singleton(1.0).unwrap(),
            DiscreteDistribution::singleton(2.0).unwrap(),
        ];
        let expl = DistributionFamily::explicit("pair", laws).unwrap();
        assert!(expl.with_horizon(3).is_err());
        assert_eq!(expl.with_horizon(1).unwrap().horizon(), 1);
    }

    #[test]
    fn csv_dir_family() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "atom,weight\n0,0.5\n2,0.5\n").unwrap();
        std::fs::write(dir.path().join("b.csv"), "1\n1\n3\n").unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let fam = DistributionFamily::from_csv_dir(dir.path()).unwrap();
        assert_eq!(fam.horizon(), 2);
        assert_eq!(fam.member(1).atoms(), &[0.0, 2.0]);
        assert_eq!(fam.member(2).atoms(), &[1.0, 3.0]);
    }
}

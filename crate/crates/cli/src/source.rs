//! Problem sources: built-in generators or Matrix Market files.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use twodevp::generators::{
    build_example61, build_orr_sommerfeld, build_orr_sommerfeld_assembled, example61_matrices,
    mimo_instance, random_hermitian, random_indefinite, random_stable,
};
use twodevp::mtx::load_matrix_market;
use twodevp::rqminmax::{dense_problem, MinmaxProblem};
use twodevp::{HermitianPair, StateMatrix, Structure, C64};

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairGenerator {
    /// The 3×3 pair with 2D-eigenvalues (1, 1) and two simple ones.
    Example61,
    /// Random Hermitian `A` and random indefinite `C` of size `--n`.
    Random,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PairSource {
    #[arg(long, value_enum, conflicts_with_all = ["a", "c"])]
    pub generator: Option<PairGenerator>,
    /// Size of the random generator.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Hermitian `A` as a Matrix Market file.
    #[arg(long)]
    pub a: Option<PathBuf>,
    /// Hermitian indefinite `C` as a Matrix Market file.
    #[arg(long)]
    pub c: Option<PathBuf>,
}

impl PairSource {
    pub fn load(&self, seed: u64) -> Result<HermitianPair> {
        match (self.generator, &self.a, &self.c) {
            (Some(PairGenerator::Example61), None, None) => Ok(build_example61()),
            (Some(PairGenerator::Random), None, None) => {
                if self.n < 2 {
                    bail!("--n must be at least 2");
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random_hermitian(self.n, &mut rng);
                let c = random_indefinite(self.n, &mut rng);
                Ok(HermitianPair::dense(a, c)?)
            }
            (None, Some(a), Some(c)) => Ok(HermitianPair::dense(load(a)?, load(c)?)?),
            _ => bail!("give exactly one of --generator or the pair --a/--c"),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinmaxGenerator {
    /// `A` and `B = A - C` from the 3×3 example pair.
    Example61,
    /// Kronecker-structured MIMO relay instance of dimension `m²`.
    Mimo,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MinmaxSource {
    #[arg(long, value_enum, conflicts_with_all = ["a", "b"])]
    pub generator: Option<MinmaxGenerator>,
    /// Antenna count of the MIMO generator.
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long)]
    pub a: Option<PathBuf>,
    #[arg(long)]
    pub b: Option<PathBuf>,
}

impl MinmaxSource {
    pub fn load(&self, seed: u64) -> Result<MinmaxProblem> {
        match (self.generator, &self.a, &self.b) {
            (Some(MinmaxGenerator::Example61), None, None) => {
                let (a, c) = example61_matrices();
                let b = &a - &c;
                Ok(dense_problem(a, b)?)
            }
            (Some(MinmaxGenerator::Mimo), None, None) => {
                let inst = mimo_instance(self.m, seed)?;
                Ok(MinmaxProblem::new(
                    inst.a,
                    inst.b,
                    Structure::KroneckerRankOne,
                )?)
            }
            (None, Some(a), Some(b)) => Ok(dense_problem(load(a)?, load(b)?)?),
            _ => bail!("give exactly one of --generator or the pair --a/--b"),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateGenerator {
    /// Orr-Sommerfeld operator for plane Poiseuille flow.
    Orr,
    /// Random dense stable matrix of size `--m`.
    RandomStable,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StateSource {
    #[arg(long, value_enum, conflicts_with = "ahat")]
    pub generator: Option<StateGenerator>,
    /// Interior grid points of the Orr-Sommerfeld discretization.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 1000.0)]
    pub reynolds: f64,
    /// Use the assembled pencil instead of the split form.
    #[arg(long)]
    pub assembled: bool,
    /// Size of the random stable generator.
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    /// Spectral abscissa bound `-margin` of the random stable generator.
    #[arg(long, default_value_t = 0.1)]
    pub margin: f64,
    /// Stable matrix as a Matrix Market file.
    #[arg(long)]
    pub ahat: Option<PathBuf>,
}

impl StateSource {
    pub fn load(&self, seed: u64) -> Result<Arc<StateMatrix>> {
        let s = match (self.generator, &self.ahat) {
            (Some(StateGenerator::Orr), None) if self.assembled => {
                build_orr_sommerfeld_assembled(self.n, self.reynolds)?
            }
            (Some(StateGenerator::Orr), None) => build_orr_sommerfeld(self.n, self.reynolds)?,
            (Some(StateGenerator::RandomStable), None) => {
                if self.m == 0 || self.margin.is_nan() || self.margin <= 0.0 {
                    bail!("--m must be positive and --margin must be positive");
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                StateMatrix::dense(random_stable(self.m, self.margin, &mut rng))?
            }
            (None, Some(p)) => StateMatrix::dense(load(p)?)?,
            _ => bail!("give exactly one of --generator or --ahat"),
        };
        Ok(Arc::new(s))
    }
}

fn load(path: &PathBuf) -> Result<Mat<C64>> {
    load_matrix_market(path).with_context(|| format!("reading {}", path.display()))
}

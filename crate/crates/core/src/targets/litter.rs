use nalgebra::DVector;
use statrs::function::gamma::ln_gamma;

use super::all_finite;
use crate::math::{log_sigmoid, log_sum_exp};
use crate::samplers::TargetDensity;

/// Dead fetuses in litters of mice: `TABLE[n - 1][x]` is the number of
/// litters of size `n` with `x` dead. Blank cells are zero.
const TABLE: [[u32; 10]; 18] = [
    [7, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [7, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [6, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [5, 2, 1, 0, 0, 0, 0, 0, 0, 0],
    [8, 2, 1, 0, 1, 1, 0, 0, 0, 0],
    [8, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [4, 4, 2, 1, 0, 0, 0, 0, 0, 0],
    [7, 7, 1, 0, 0, 0, 0, 0, 0, 0],
    [8, 9, 7, 1, 1, 0, 0, 0, 0, 0],
    [22, 17, 2, 0, 1, 0, 0, 1, 1, 0],
    [30, 18, 9, 1, 2, 0, 1, 0, 1, 0],
    [54, 27, 12, 2, 1, 0, 2, 1, 0, 0],
    [46, 30, 8, 4, 1, 1, 0, 1, 0, 0],
    [43, 21, 13, 3, 1, 0, 0, 1, 0, 1],
    [22, 22, 5, 2, 1, 0, 0, 0, 0, 0],
    [6, 6, 3, 0, 1, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [3, 0, 2, 1, 0, 0, 0, 0, 0, 0],
];

/// Number of litters in the embedded table.
pub const LITTER_TOTAL: u32 = 555;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LitterCell {
    /// Litter size.
    pub n: u32,
    /// Dead count.
    pub x: u32,
    /// Number of litters.
    pub count: u32,
    log_binom: f64,
}

impl LitterCell {
    pub fn new(n: u32, x: u32, count: u32) -> Self {
        let log_binom =
            ln_gamma(n as f64 + 1.0) - ln_gamma(x as f64 + 1.0) - ln_gamma((n - x) as f64 + 1.0);
        Self {
            n,
            x,
            count,
            log_binom,
        }
    }

    fn log_binomial(&self, log_p: f64, log_q: f64) -> f64 {
        self.log_binom + self.x as f64 * log_p + (self.n - self.x) as f64 * log_q
    }
}

/// Two-binomial mixture likelihood in logit coordinates `(γ̃, μ̃, ṽ)`,
/// with a flat prior on those coordinates.
#[derive(Debug, Clone)]
pub struct LitterTarget {
    cells: Vec<LitterCell>,
}

/// The full litter table; cells with zero count are dropped.
pub fn embedded_litter_data() -> LitterTarget {
    let cells = TABLE
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            let n = i as u32 + 1;
            row.iter()
                .enumerate()
                .filter(|&(_, &c)| c > 0)
                .map(move |(x, &c)| LitterCell::new(n, x as u32, c))
        })
        .collect();
    LitterTarget { cells }
}

impl LitterTarget {
    pub fn from_cells(cells: Vec<LitterCell>) -> Self {
        Self { cells }
    }

    pub fn cells(&self) -> &[LitterCell] {
        &self.cells
    }

    /// Number of litters of size `n` with `x` dead.
    pub fn count(&self, n: u32, x: u32) -> u32 {
        self.cells
            .iter()
            .find(|c| c.n == n && c.x == x)
            .map_or(0, |c| c.count)
    }

    pub fn total_litters(&self) -> u32 {
        self.cells.iter().map(|c| c.count).sum()
    }

    pub fn log_likelihood(&self, params: &DVector<f64>) -> f64 {
        let (g, m, v) = (params[0], params[1], params[2]);
        let (log_g, log_1mg) = (log_sigmoid(g), log_sigmoid(-g));
        let (log_m, log_1mm) = (log_sigmoid(m), log_sigmoid(-m));
        let (log_v, log_1mv) = (log_sigmoid(v), log_sigmoid(-v));
        self.cells
            .iter()
            .map(|c| {
                let a = log_g + c.log_binomial(log_m, log_1mm);
                let b = log_1mg + c.log_binomial(log_v, log_1mv);
                c.count as f64 * log_sum_exp(&[a, b])
            })
            .sum()
    }
}

impl TargetDensity for LitterTarget {
    fn dim(&self) -> usize {
        3
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        if x.len() != 3 || !all_finite(x) {
            return f64::NEG_INFINITY;
        }
        self.log_likelihood(x)
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::Result;

use super::params::{ParamStore, TapeParams};
use super::tape::{Tape, TensorId};

/// Which parameter coordinates the checker perturbs.
#[derive(Clone, Copy, Debug)]
pub enum CoordSampling {
    /// Every coordinate of every tensor. Exhaustive; only viable for small
    /// models.
    All,
    /// At most this many coordinates per tensor, drawn without replacement
    /// from the given seed. The analytic gradient is still full; only the
    /// numeric probes are subsampled.
    PerTensor(usize, u64),
}

/// Outcome of a finite-difference gradient check.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_dev: f64,
    /// `(parameter name, flat coordinate)` of the worst deviation.
    pub worst: Option<(String, usize)>,
    pub coords_checked: usize,
    /// Coordinates where the loss is not smooth inside the probe window
    /// (half-step estimates disagree, e.g. a ReLU kink): the central
    /// difference is undefined there, so they are excluded rather than
    /// compared.
    pub skipped_nonsmooth: usize,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.max_rel_dev < self.tol
    }
}

/// Denominator floor for the relative deviation; below this magnitude the
/// comparison degrades gracefully to an absolute one.
const DENOM_FLOOR: f64 = 1e-6;

/// Compares the tape's analytic gradients against central finite
/// differences of the scalar loss produced by `build`.
///
/// `build` must construct the loss from the injected parameter leaves only
/// (any other inputs it captures must stay fixed across calls).
pub fn finite_difference_check<F>(
    build: F,
    params: &ParamStore,
    step: f64,
    tol: f64,
    sampling: CoordSampling,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &TapeParams) -> Result<TensorId>,
{
    // Analytic pass.
    let mut tape = Tape::new();
    let tp = params.inject(&mut tape)?;
    let loss = build(&mut tape, &tp)?;
    tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .enumerate()
        .map(|(i, (_, t))| {
            tape.grad(tp.ids()[i]).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; t.numel()])
        })
        .collect();

    let eval = |p: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let tp = p.inject(&mut tape)?;
        let loss = build(&mut tape, &tp)?;
        Ok(tape.scalar(loss))
    };

    let mut report = GradCheckReport { max_rel_dev: 0.0, worst: None, coords_checked: 0, tol };
    for (pi, (name, tensor)) in params.iter().enumerate() {
        let coords: Vec<usize> = match sampling {
            CoordSampling::All => (0..tensor.numel()).collect(),
            CoordSampling::PerTensor(n, seed) => {
                if tensor.numel() <= n {
                    (0..tensor.numel()).collect()
                } else {
                    // Per-tensor stream so adding tensors never reshuffles
                    // the coordinates picked for earlier ones.
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (pi as u64).wrapping_mul(0x9e3779b97f4a7c15));
                    rand::seq::index::sample(&mut rng, tensor.numel(), n).into_vec()
                }
            }
        };
        for c in coords {
            let mut plus = params.clone();
            plus.get_mut(name).unwrap().data_mut()[c] += step;
            let f_plus = eval(&plus)?;
            let mut minus = params.clone();
            minus.get_mut(name).unwrap().data_mut()[c] -= step;
            let f_minus = eval(&minus)?;
            let numeric = (f_plus - f_minus) / (2.0 * step);
            let a = analytic[pi][c];
            let dev = (a - numeric).abs() / a.abs().max(numeric.abs()).max(DENOM_FLOOR);
            report.coords_checked += 1;
            if dev > report.max_rel_dev {
                report.max_rel_dev = dev;
                report.worst = Some((name.to_string(), c));
            }
        }
    }
    Ok(report)
}

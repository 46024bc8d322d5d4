//! Reproducible i.i.d. sampling from the tensorized beta density and the
//! empirical seminorm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::jacobi::JacobiParams;

/// SplitMix64 step; used to derive independent stream seeds from a master
/// seed so that trial t (or row i) of a run has its own deterministic
/// stream regardless of execution order.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// m points in [−1,1]^d drawn i.i.d. from ⊗ dβ, stored dense row-major,
/// together with everything needed to regenerate them bit-for-bit.
#[derive(Debug, Clone)]
pub struct SampleSet {
    points: Vec<f64>,
    theta1: f64,
    theta2: f64,
    seed: u64,
    m: usize,
    d: usize,
}

impl SampleSet {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn theta(&self) -> (f64, f64) {
        (self.theta1, self.theta2)
    }

    /// The i-th point as a coordinate slice.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.d)
    }

    /// CSV body: one point per row, d columns, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|&x| crate::report::format_float(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// JSON sidecar describing the draw.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.seed,
            "theta1": self.theta1,
            "theta2": self.theta2,
            "m": self.m,
            "d": self.d,
        })
    }
}

/// Draw one coordinate t ~ dβ.
///
/// Uniform and Chebyshev use inverse-CDF shortcuts; general parameters use
/// the Gamma-ratio form of a Beta draw. The density is proportional to
/// (1−t)^{θ₁}(1+t)^{θ₂}, so with t = 2B − 1 the Beta shape parameters are
/// (θ₂+1, θ₁+1), in that order.
fn draw_coordinate(rng: &mut ChaCha8Rng, theta1: f64, theta2: f64) -> f64 {
    if theta1 == 0.0 && theta2 == 0.0 {
        return 2.0 * rng.gen::<f64>() - 1.0;
    }
    if theta1 == -0.5 && theta2 == -0.5 {
        return (std::f64::consts::PI * rng.gen::<f64>()).cos();
    }
    let gamma_a = Gamma::new(theta2 + 1.0, 1.0).expect("shape > 0");
    let gamma_b = Gamma::new(theta1 + 1.0, 1.0).expect("shape > 0");
    loop {
        let x: f64 = gamma_a.sample(rng);
        let y: f64 = gamma_b.sample(rng);
        if x + y > 0.0 {
            let t = 2.0 * x / (x + y) - 1.0;
            // Clamp away pathological round-off outside the closed interval.
            return t.clamp(-1.0, 1.0);
        }
    }
}

/// Draw m i.i.d. points from the tensorized density. Row i uses the stream
/// seed derive(seed, i), so the result is independent of any partitioning
/// of rows across workers.
pub fn draw_samples(params: &JacobiParams, d: usize, m: usize, seed: u64) -> Result<SampleSet> {
    if m < 1 || d < 1 {
        return Err(Error::Domain(format!("sampling needs m ≥ 1, d ≥ 1, got m={m}, d={d}")));
    }
    let (theta1, theta2) = (params.theta1(), params.theta2());
    let mut points = vec![0.0f64; m * d];
    for (i, row) in points.chunks_mut(d).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        for slot in row.iter_mut() {
            *slot = draw_coordinate(&mut rng, theta1, theta2);
        }
    }
    Ok(SampleSet { points, theta1, theta2, seed, m, d })
}

/// Root-mean-square of the values: ‖v‖_m = (m⁻¹ Σ v(yⁱ)²)^{1/2}.
pub fn empirical_norm(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

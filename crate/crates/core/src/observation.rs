//! Discretised paths of `dY(x) = (Kf)(x) dx + ε dW(x)`.
//!
//! Increments are taken over the grid cells, `ΔY_i = (Kf)(x_i)Δ + ε√Δ Z_i`.
//! The normals `Z_i` come from a counter-based stream: ChaCha8 keyed by the
//! seed, with block `j` feeding `Z_{2j}` and `Z_{2j+1}` through Box-Muller.
//! Any `Z_i` can therefore be regenerated on its own.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::kernels::Kernel;
use crate::spectral::{convolve_spectrum, ensure_same_grid, parse_pair, Grid};
use crate::testbed::ChangePointFunction;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationPath {
    grid: Grid,
    increments: Vec<f64>,
    eps: f64,
    seed: u64,
    kernel_id: String,
    function_id: String,
}

impl ObservationPath {
    pub fn new(
        grid: Grid,
        increments: Vec<f64>,
        eps: f64,
        seed: u64,
        kernel_id: impl Into<String>,
        function_id: impl Into<String>,
    ) -> Result<Self> {
        if increments.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} increments for a grid of {} nodes",
                increments.len(),
                grid.len()
            )));
        }
        if increments.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite increment"));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(invalid(format!("eps must be finite and >= 0, got {eps}")));
        }
        Ok(Self {
            grid,
            increments,
            eps,
            seed,
            kernel_id: kernel_id.into(),
            function_id: function_id.into(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kernel_id(&self) -> &str {
        &self.kernel_id
    }

    pub fn function_id(&self) -> &str {
        &self.function_id
    }
}

fn unit_open(x: u64) -> f64 {
    // (0, 1]: never zero, so the logarithm below is finite.
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(a: u64, b: u64) -> (f64, f64) {
    let r = (-2.0 * unit_open(a).ln()).sqrt();
    let (s, c) = (2.0 * PI * unit_open(b)).sin_cos();
    (r * c, r * s)
}

/// The `i`-th standard normal of the stream keyed by `seed`.
pub fn normal_at(seed: u64, i: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(4 * u128::from(i / 2));
    let (z0, z1) = box_muller(rng.next_u64(), rng.next_u64());
    if i.is_multiple_of(2) {
        z0
    } else {
        z1
    }
}

/// The first `n` normals of the stream keyed by `seed`.
pub fn normals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        let (z0, z1) = box_muller(rng.next_u64(), rng.next_u64());
        out.push(z0);
        out.push(z1);
    }
    out.truncate(n);
    out
}

/// Holds the noiseless increments `(Kf)(x_i)Δ` so that many replicates of
/// one `(f, K)` pair share a single convolution.
#[derive(Clone, Debug)]
pub struct PathSimulator {
    grid: Grid,
    mean: Vec<f64>,
    kernel_id: String,
    function_id: String,
}

impl PathSimulator {
    pub fn new(f: &ChangePointFunction, kernel: &Kernel, grid: &Grid) -> Result<Self> {
        ensure_same_grid(f.grid(), grid, "function vs path grid")?;
        // The analytic f̂ keeps the jump location off the node lattice.
        let kf = convolve_spectrum(&f.spectrum(), kernel);
        let dx = grid.spacing();
        Ok(Self {
            grid: *grid,
            mean: kf.values().iter().map(|v| v * dx).collect(),
            kernel_id: kernel.id(),
            function_id: f.id(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `(Kf)(x_i)Δ`.
    pub fn mean_increments(&self) -> &[f64] {
        &self.mean
    }

    pub fn simulate(&self, eps: f64, seed: u64) -> Result<ObservationPath> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(invalid(format!("eps must be finite and >= 0, got {eps}")));
        }
        let increments = if eps == 0.0 {
            self.mean.clone()
        } else {
            let scale = eps * self.grid.spacing().sqrt();
            self.mean
                .iter()
                .zip(normals(seed, self.mean.len()))
                .map(|(m, z)| m + scale * z)
                .collect()
        };
        ObservationPath::new(
            self.grid,
            increments,
            eps,
            seed,
            self.kernel_id.clone(),
            self.function_id.clone(),
        )
    }
}

pub fn simulate_path(
    f: &ChangePointFunction,
    kernel: &Kernel,
    eps: f64,
    grid: &Grid,
    seed: u64,
) -> Result<ObservationPath> {
    PathSimulator::new(f, kernel, grid)?.simulate(eps, seed)
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format_version: u32,
    eps: f64,
    seed: u64,
    grid: Grid,
    kernel_id: String,
    function_id: String,
    checksum: String,
}

/// Location of the metadata file written next to a path CSV.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `x,dY` rows to `path` and metadata to `<path>.json`.
pub fn save_path(p: &ObservationPath, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut csv = String::with_capacity(p.increments.len() * 48);
    csv.push_str("x,dY\n");
    for (k, v) in p.increments.iter().enumerate() {
        let _ = writeln!(csv, "{:.16e},{:.16e}", p.grid.x(k), v);
    }
    let sidecar = Sidecar {
        format_version: FORMAT_VERSION,
        eps: p.eps,
        seed: p.seed,
        grid: p.grid,
        kernel_id: p.kernel_id.clone(),
        function_id: p.function_id.clone(),
        checksum: sha256_hex(csv.as_bytes()),
    };
    std::fs::write(path, &csv)?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn load_path(path: impl AsRef<Path>) -> Result<ObservationPath> {
    let path = path.as_ref();
    let fail = |detail: String| Error::Format {
        path: path.to_path_buf(),
        detail,
    };
    let meta_text = std::fs::read_to_string(sidecar_path(path))?;
    let meta: serde_json::Value = serde_json::from_str(&meta_text)?;
    let version = meta
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| fail("sidecar has no format_version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::Version {
            expected: FORMAT_VERSION,
            found: version as u32,
        });
    }
    let meta: Sidecar = serde_json::from_value(meta)?;
    let grid = Grid::new(meta.grid.x_min(), meta.grid.x_max(), meta.grid.len())
        .map_err(|e| fail(e.to_string()))?;

    let bytes = std::fs::read(path)?;
    let found = sha256_hex(&bytes);
    if found != meta.checksum {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            expected: meta.checksum,
            found,
        });
    }
    let text = String::from_utf8(bytes).map_err(|e| fail(e.to_string()))?;
    let mut lines = text.lines();
    if lines.next() != Some("x,dY") {
        return Err(fail("expected header `x,dY`".into()));
    }
    let mut increments = Vec::with_capacity(grid.len());
    for (i, line) in lines.enumerate() {
        let (x, v) = parse_pair(line).ok_or_else(|| fail(format!("bad row {}: {line:?}", i + 2)))?;
        if i >= grid.len() || (x - grid.x(i)).abs() > 1e-9 * grid.spacing().max(1.0) {
            return Err(fail(format!("row {} is off the declared grid", i + 2)));
        }
        increments.push(v);
    }
    if increments.len() != grid.len() {
        return Err(fail(format!(
            "{} rows for a grid of {} nodes",
            increments.len(),
            grid.len()
        )));
    }
    ObservationPath::new(grid, increments, meta.eps, meta.seed, meta.kernel_id, meta.function_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::green_kernel;
    use crate::testbed::{make_jump_function, Bump, ClassSpec};

    fn setup() -> (ChangePointFunction, Kernel, Grid) {
        let grid = Grid::observation_default();
        let f = make_jump_function(
            0.41,
            1.0,
            0.5,
            &[Bump { center: -1.0, amp: 0.8, width: 0.3 }],
            ClassSpec::Fm { m: 1.0, l: 5.0, a: 1.0 },
            grid,
        )
        .unwrap();
        (f, green_kernel(&[1.0]).unwrap(), grid)
    }

    #[test]
    fn noiseless_path_is_the_mean() {
        let (f, k, grid) = setup();
        let sim = PathSimulator::new(&f, &k, &grid).unwrap();
        let p = sim.simulate(0.0, 99).unwrap();
        assert_eq!(p.increments(), sim.mean_increments());
        let kf = convolve_spectrum(&f.spectrum(), &k);
        for (dy, m) in p.increments().iter().zip(kf.values()) {
            assert_eq!(*dy, m * grid.spacing());
        }
    }

    #[test]
    fn noise_variance_and_whiteness() {
        let (f, k, grid) = setup();
        let sim = PathSimulator::new(&f, &k, &grid).unwrap();
        let eps = 0.1;
        let p = sim.simulate(eps, 5).unwrap();
        let dx = grid.spacing();
        let z: Vec<f64> = p
            .increments()
            .iter()
            .zip(sim.mean_increments())
            .map(|(y, m)| (y - m) / dx.sqrt())
            .collect();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var / (eps * eps) - 1.0).abs() < 0.05, "{var}");
        let lag1 = z.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n * var);
        assert!(lag1.abs() < 3.0 / n.sqrt(), "{lag1}");
    }

    #[test]
    fn counter_access_matches_bulk_stream() {
        let bulk = normals(123, 101);
        for i in [0usize, 1, 2, 17, 50, 99, 100] {
            assert_eq!(normal_at(123, i as u64), bulk[i]);
        }
        assert_ne!(normals(124, 4), normals(123, 4));
    }

    #[test]
    fn deterministic_and_linear_in_f() {
        let (f, k, grid) = setup();
        let a = simulate_path(&f, &k, 0.01, &grid, 42).unwrap();
        let b = simulate_path(&f, &k, 0.01, &grid, 42).unwrap();
        assert_eq!(a.increments(), b.increments());

        let class = ClassSpec::Fm { m: 1.0, l: 50.0, a: 0.1 };
        let g = make_jump_function(0.7, -2.0, 0.3, &[], class, grid).unwrap();
        let mf = PathSimulator::new(&f, &k, &grid).unwrap();
        let mg = PathSimulator::new(&g, &k, &grid).unwrap();
        let pf = mf.simulate(0.02, 7).unwrap();
        let pg = mg.simulate(0.02, 7).unwrap();
        // Same seed, same noise: the difference is purely deterministic.
        for i in 0..grid.len() {
            let lhs = pf.increments()[i] - pg.increments()[i];
            let rhs = mf.mean_increments()[i] - mg.mean_increments()[i];
            assert!((lhs - rhs).abs() < 1e-15);
        }
    }

    #[test]
    fn save_load_round_trip_and_failures() {
        let (f, k, grid) = setup();
        let p = simulate_path(&f, &k, 0.05, &grid, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("path.csv");
        save_path(&p, &file).unwrap();
        let back = load_path(&file).unwrap();
        assert_eq!(back, p);

        // Truncation.
        let text = std::fs::read_to_string(&file).unwrap();
        std::fs::write(&file, &text[..text.len() / 2]).unwrap();
        assert!(load_path(&file).is_err());

        // Version tag.
        save_path(&p, &file).unwrap();
        let side = sidecar_path(&file);
        let meta = std::fs::read_to_string(&side).unwrap().replace("\"format_version\": 1", "\"format_version\": 2");
        std::fs::write(&side, meta).unwrap();
        assert!(matches!(load_path(&file), Err(Error::Version { expected: 1, found: 2 })));

        // Edited value.
        save_path(&p, &file).unwrap();
        let text = std::fs::read_to_string(&file).unwrap();
        let edited = text.replacen("e-", "e+", 1);
        std::fs::write(&file, edited).unwrap();
        assert!(matches!(load_path(&file), Err(Error::Checksum { .. })));
    }

    #[test]
    fn rejects_mismatched_grid() {
        let (f, k, _) = setup();
        let other = Grid::new(-4.0, 5.0, 1 << 12).unwrap();
        assert!(matches!(simulate_path(&f, &k, 0.1, &other, 1), Err(Error::GridMismatch(_))));
        assert!(simulate_path(&f, &k, -0.1, f.grid(), 1).is_err());
    }
}

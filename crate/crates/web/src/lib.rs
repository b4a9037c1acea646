//! wasm-bindgen entry points for the demo page in `www/`.
//!
//! Everything comes back as flat `Float64Array`s; the layout of each is
//! documented on the function.

use snmf_core::cubic::solve_entry_surrogate;
use snmf_core::sbsum::compute_entry_coefficients;
use snmf_core::simgen::{generate, initialize, GeneratorSpec, Method};
use snmf_core::{run_solver, BlockOrderPolicy, Engine, GramCache, SolverConfig};
use wasm_bindgen::prelude::*;

fn method(name: &str) -> Result<Method, String> {
    match name {
        "ck" => Ok(Method::Ck),
        "sgk" => Ok(Method::Sgk),
        other => Err(format!("unknown generator {other:?}")),
    }
}

fn spec(name: &str, n: usize, m: usize, noise: f64, seed: u64) -> Result<GeneratorSpec, String> {
    Ok(GeneratorSpec {
        method: method(name)?,
        noise_sigma: noise,
        ..GeneratorSpec::ck(n, m, seed)
    })
}

/// Dense row-major `n*n` similarity matrix from the `"ck"` or `"sgk"` generator.
#[wasm_bindgen]
pub fn similarity_heatmap(method: &str, n: usize, m: usize, noise: f64, seed: u32) -> Result<Vec<f64>, String> {
    let mat = generate(&spec(method, n, m, noise, seed.into())?).map_err(|e| e.to_string())?;
    Ok(mat.to_dense_vec())
}

/// Runs both engines from the same start for exactly `sweeps` sweeps.
///
/// Returns `4 * sweeps` values: sBSUM residual %, vBSUM residual %,
/// sBSUM elapsed seconds, vBSUM elapsed seconds.
#[wasm_bindgen]
pub fn compare_engines(
    method: &str,
    n: usize,
    r: usize,
    noise: f64,
    seed: u32,
    sweeps: usize,
) -> Result<Vec<f64>, String> {
    let mat = generate(&spec(method, n, r, noise, seed.into())?).map_err(|e| e.to_string())?;
    let x0 = initialize(&mat, r, u64::from(seed) + 1);
    let mut residual = Vec::with_capacity(2 * sweeps);
    let mut elapsed = Vec::with_capacity(2 * sweeps);
    for engine in [Engine::Scalar, Engine::Vector { i_max: 10 }] {
        let config = SolverConfig {
            engine,
            policy: BlockOrderPolicy::cyclic(),
            max_sweeps: sweeps,
            gap_tol: 0.0,
            ..SolverConfig::default()
        };
        let out = run_solver(&mat, x0.clone(), &config).map_err(|e| e.to_string())?;
        residual.extend(out.trace.iter().map(|t| t.relative_residual));
        elapsed.extend(out.trace.iter().map(|t| t.elapsed_seconds));
    }
    residual.extend(elapsed);
    Ok(residual)
}

/// The exact one-entry objective change `g` and its convex bound `g~` for
/// entry `(i, j)` of a random start, sampled at `points` values on `[0, hi]`.
///
/// Layout: `[x_cur, x_new, lift, hi, v_0, g_0, g~_0, v_1, g_1, g~_1, ...]`.
#[wasm_bindgen]
pub fn entry_surrogate_curve(
    n: usize,
    r: usize,
    seed: u32,
    i: usize,
    j: usize,
    points: usize,
) -> Result<Vec<f64>, String> {
    if i >= n || j >= r {
        return Err(format!("entry ({i}, {j}) outside {n}x{r}"));
    }
    if points < 2 {
        return Err("need at least two points".into());
    }
    let mat = generate(&GeneratorSpec::ck(n, r, seed.into())).map_err(|e| e.to_string())?;
    let x = initialize(&mat, r, u64::from(seed) + 1);
    let cache = GramCache::from_factor(&x);
    let ctx = compute_entry_coefficients(&mat, &x, &cache, i, j);
    let x_new = solve_entry_surrogate(ctx.surrogate_coefficients()).map_err(|e| e.to_string())?;
    let hi = 2.0 * ctx.x_cur.max(x_new) + 0.5;
    let mut out = vec![ctx.x_cur, x_new, ctx.coefficients().curvature_lift(), hi];
    for k in 0..points {
        let v = hi * k as f64 / (points - 1) as f64;
        out.extend([v, ctx.quartic(v), ctx.surrogate(v)]);
    }
    Ok(out)
}

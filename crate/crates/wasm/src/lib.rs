//! Browser bindings for three interactive views: orbital spreading through the
//! circuit, the QAB schedule with its gap, and the mutual-information profile.
//!
//! Every export returns a flat `Float64Array`; the page reshapes it.

use dqap_core::adiabatic::{qab_gap, qab_schedule};
use dqap_core::ansatz::{build_dqap_state, intermediate_states, DqapParams};
use dqap_core::entanglement::mutual_information;
use dqap_core::optimizer::{optimize_series, polish, InitMode, OptimizerConfig};
use dqap_core::{Boundary, LatticeSpec};
use wasm_bindgen::prelude::*;

/// Largest chain the page may request; keeps optimizations interactive.
pub const MAX_SITES: usize = 64;
pub const MAX_DEPTH: usize = 16;

fn spec(sites: usize) -> Result<LatticeSpec, String> {
    if sites > MAX_SITES {
        return Err(format!("L = {sites} exceeds the demo limit {MAX_SITES}"));
    }
    LatticeSpec::half_filled(sites, Boundary::Antiperiodic).map_err(|e| e.to_string())
}

/// Warm-started optimum at `depth`, polished.
pub fn optimized(spec: &LatticeSpec, depth: usize) -> Result<DqapParams, String> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(format!("depth {depth} must lie in 1..={MAX_DEPTH}"));
    }
    let config = OptimizerConfig { delta_beta: 0.2, init_mode: InitMode::WarmStart, ..OptimizerConfig::default() };
    let depths: Vec<usize> = (1..=depth).collect();
    let runs = optimize_series::<DqapParams>(spec, &depths, &config).map_err(|e| e.to_string())?;
    let last = runs.into_iter().last().ok_or("empty series")?;
    Ok(polish(spec, &last.params, 0.5, 100).map_err(|e| e.to_string())?.0)
}

/// `|phi_k(x)|^2` after each layer, rows `m = 0..=depth`, columns `x`.
pub fn orbital_density(sites: usize, depth: usize, orbital: usize) -> Result<Vec<f64>, String> {
    let spec = spec(sites)?;
    if orbital >= spec.particles() {
        return Err(format!("orbital {orbital} out of range 0..{}", spec.particles()));
    }
    let params = optimized(&spec, depth)?;
    let states = intermediate_states(&spec, &params).map_err(|e| e.to_string())?;
    Ok(states
        .iter()
        .flat_map(|s| s.orbitals().column(orbital).iter().map(|z| z.norm_sqr()).collect::<Vec<_>>())
        .collect())
}

/// Interleaved `(s, chi_qab, gap_qab, gap_linear)` on `samples` points of `[0, 1]`.
pub fn schedule_curve(sites: usize, samples: usize) -> Result<Vec<f64>, String> {
    if sites < 4 || !sites.is_multiple_of(2) || samples < 2 {
        return Err("need even L >= 4 and at least two samples".into());
    }
    Ok((0..samples)
        .flat_map(|i| {
            let s = i as f64 / (samples - 1) as f64;
            let chi = qab_schedule(sites, s);
            [s, chi, qab_gap(sites, chi, 1.0), qab_gap(sites, s, 1.0)]
        })
        .collect())
}

/// `I(x0, x)` for every site `x` of the optimized state; zero at `x = x0`.
pub fn mutual_information_profile(sites: usize, depth: usize, x0: usize) -> Result<Vec<f64>, String> {
    let spec = spec(sites)?;
    if x0 >= sites {
        return Err(format!("site {x0} out of range"));
    }
    let state = build_dqap_state(&spec, &optimized(&spec, depth)?).map_err(|e| e.to_string())?;
    (0..sites)
        .map(|x| if x == x0 { Ok(0.0) } else { mutual_information(&state, x0, x).map_err(|e| e.to_string()) })
        .collect()
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = orbitalDensity)]
pub fn orbital_density_js(sites: usize, depth: usize, orbital: usize) -> Result<Vec<f64>, JsError> {
    js(orbital_density(sites, depth, orbital))
}

#[wasm_bindgen(js_name = scheduleCurve)]
pub fn schedule_curve_js(sites: usize, samples: usize) -> Result<Vec<f64>, JsError> {
    js(schedule_curve(sites, samples))
}

#[wasm_bindgen(js_name = mutualInformationProfile)]
pub fn mutual_information_profile_js(sites: usize, depth: usize, x0: usize) -> Result<Vec<f64>, JsError> {
    js(mutual_information_profile(sites, depth, x0))
}

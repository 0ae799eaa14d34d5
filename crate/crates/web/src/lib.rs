//! WebAssembly bindings for the browser demo in `www/`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use pupload::engine::{poisson_mixture, predict_load_pmf, prob_still_stored, ForecastConfig, ForecastRecord};
use pupload::kernel::{KernelProvider, StaticKernels};
use pupload::pmf::HoldingTimePmf;
use pupload::sim::{simulate, ScenarioConfig};
use pupload::{Error, Result};

/// Parses comma or whitespace separated weights for delays `1, 2, ...`.
pub fn parse_weights(text: &str) -> Result<Vec<f64>> {
    let mut w = vec![0.0];
    for tok in text.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
        let x: f64 = tok
            .parse()
            .map_err(|_| Error::InvalidQuery(format!("not a number: {tok:?}")))?;
        w.push(x);
    }
    Ok(w)
}

/// Probability that a parcel delivered `elapsed` slots ago is still stored
/// `j` slots from now, for `j` in `0..=max_j`.
pub fn still_stored(pickup_weights: &str, elapsed: i64, max_j: i64) -> Result<Vec<f64>> {
    let pmf = HoldingTimePmf::from_weights(&parse_weights(pickup_weights)?)?;
    let kernels = StaticKernels::new(vec![pmf]);
    (0..=max_j.max(0))
        .map(|j| Ok(prob_still_stored(&kernels, 0, elapsed, j)?.value()))
        .collect()
}

/// Load pmf of `Poisson(lambda)` orders, each kept with probability `p`.
pub fn thinned_poisson(lambda: f64, p: f64, coverage: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0 && lambda <= 1e4) {
        return Err(Error::InvalidQuery(format!("rate {lambda} outside [0, 10000]")));
    }
    if !(0.0..=1.0).contains(&p) || !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::InvalidQuery("p must lie in [0, 1] and coverage in (0, 1)".into()));
    }
    Ok(poisson_mixture(lambda, p, coverage).0.probs().to_vec())
}

#[derive(Debug, Serialize)]
pub struct DemoForecast {
    pub k: i64,
    pub forecasts: Vec<ForecastRecord>,
    pub actual: Vec<u32>,
    /// True load from `k - 24` to the last horizon, for plotting.
    pub history: Vec<u32>,
}

/// Simulates the default synthetic pick-up point and forecasts the load at
/// midnight of `day` with the generating models.
pub fn synthetic_forecast(days: u32, seed: u64, day: u32, horizons: &[i64]) -> Result<DemoForecast> {
    if day == 0 || day >= days {
        return Err(Error::InvalidQuery(format!("day must lie in 1..{days}")));
    }
    let sc = ScenarioConfig::default_synthetic(days, seed)?;
    let trace = simulate(&sc)?;
    let spd = sc.calendar().slots_per_day() as i64;
    let k = day as i64 * spd;
    let active = trace
        .events
        .visible_at(k)
        .for_pup(&sc.pup)
        .active_at(k, sc.kernel.n_statuses());
    let view = sc.intensity_after(k);
    let cfg = ForecastConfig {
        pup: Some(sc.pup.clone()),
        ..ForecastConfig::default()
    };
    let mut forecasts = Vec::new();
    let mut actual = Vec::new();
    for &j in horizons {
        let f = predict_load_pmf(&sc.kernel, &active, &view, &sc.selection, k, j, &cfg)?;
        forecasts.push(ForecastRecord::new(sc.pup.clone(), k, j, f)?);
        actual.push(trace.load.get((k + j) as usize).copied().unwrap_or(0));
    }
    let last = horizons.iter().copied().max().unwrap_or(0);
    let history = (k - spd..=k + last)
        .map(|t| trace.load.get(t.max(0) as usize).copied().unwrap_or(0))
        .collect();
    Ok(DemoForecast {
        k,
        forecasts,
        actual,
        history,
    })
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = stillStored)]
pub fn still_stored_js(pickup_weights: &str, elapsed: i32, max_j: i32) -> std::result::Result<Vec<f64>, JsError> {
    still_stored(pickup_weights, elapsed as i64, max_j as i64).map_err(js)
}

#[wasm_bindgen(js_name = thinnedPoisson)]
pub fn thinned_poisson_js(lambda: f64, p: f64, coverage: f64) -> std::result::Result<Vec<f64>, JsError> {
    thinned_poisson(lambda, p, coverage).map_err(js)
}

/// Returns the forecast as a JSON string.
#[wasm_bindgen(js_name = syntheticForecast)]
pub fn synthetic_forecast_js(days: u32, seed: u32, day: u32) -> std::result::Result<String, JsError> {
    let out = synthetic_forecast(days, seed as u64, day, &[13, 37, 61, 85]).map_err(js)?;
    serde_json::to_string(&out).map_err(|e| JsError::new(&e.to_string()))
}

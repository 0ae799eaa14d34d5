//! Fitting every model from an event log and forecasting at an anchor.

use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::arrivals::{
    fit_hourly_profile, DailyForecaster, DailyVolumeModel, HourlyProfile, OrderIntensity,
    SeasonalTrendForecaster,
};
use crate::calendar::{Calendar, OpeningHours, Slot};
use crate::engine::{predict_load_pmf, ForecastConfig, ForecastRecord, LoadForecast};
use crate::error::{Error, Result};
use crate::estimation::{estimate_selection, fit_transition_kernel, EstimationConfig, SelectionModel};
use crate::kernel::{KernelProvider, TransitionKernel};
use crate::parcel::{EventLog, StatusId};

/// Everything needed to fit models for one pickup point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub pup: String,
    pub epoch: chrono::NaiveDateTime,
    pub slot_hours: u32,
    pub n_statuses: StatusId,
    pub entry_status: StatusId,
    pub opening: OpeningHours,
    pub estimation: EstimationConfig,
    pub volume_forecaster: SeasonalTrendForecaster,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            pup: "pup-1".into(),
            epoch: chrono::NaiveDate::from_ymd_opt(2024, 1, 1)
                .expect("valid date")
                .and_hms_opt(0, 0, 0)
                .expect("valid time"),
            slot_hours: 1,
            n_statuses: 4,
            entry_status: 2,
            opening: OpeningHours::default(),
            estimation: EstimationConfig::default(),
            volume_forecaster: SeasonalTrendForecaster::default(),
        }
    }
}

impl FitConfig {
    pub fn calendar(&self) -> Result<Calendar> {
        Calendar::new(self.epoch, self.slot_hours)
    }
}

/// Models fitted on the events visible at some cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModels {
    pub kernel: TransitionKernel,
    pub profile: HourlyProfile,
    pub volumes: DailyVolumeModel,
    pub selection: SelectionModel,
}

/// Fits kernels, hourly profile, daily volumes (complete days before the day of
/// the log cutoff) and selection shares.
pub fn fit_models(log: &EventLog, cfg: &FitConfig) -> Result<FittedModels> {
    let cal = cfg.calendar()?;
    let log = log.for_pup(&cfg.pup);
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let (kernel, _) = fit_transition_kernel(
        &log,
        &cal,
        &cfg.pup,
        cfg.n_statuses,
        cfg.entry_status,
        &cfg.opening,
        &cfg.estimation,
    )?;
    let profile = fit_hourly_profile(&log, &cal, cfg.entry_status)?;
    let through = cal.date_of(log.cutoff()) - Duration::days(1);
    let volumes = DailyVolumeModel::from_log(&log, &cal, cfg.entry_status, through)?;
    let selection = estimate_selection(&log)?;
    Ok(FittedModels {
        kernel,
        profile,
        volumes,
        selection,
    })
}

/// Load forecasts at `k` for every horizon, using only events visible at `k`.
///
/// The volume history is cut before the day of `k`, so forecasting at a
/// midnight anchor uses complete days only.
pub fn forecast_at(
    models: &FittedModels,
    log: &EventLog,
    k: Slot,
    horizons: &[Slot],
    forecaster: &dyn DailyForecaster,
    cfg: &ForecastConfig,
) -> Result<Vec<LoadForecast>> {
    let cal = *models.kernel.calendar();
    let visible = log.visible_at(k);
    let n = models.kernel.n_statuses();
    let active = match &cfg.pup {
        Some(pup) => visible.for_pup(pup).active_at(k, n),
        None => visible.active_at(k, n),
    };
    let history = models.volumes.until(cal.date_of(k));
    let max_j = horizons.iter().copied().max().unwrap_or(0);
    let intensity = OrderIntensity::forecast(
        cal,
        models.profile.clone(),
        &history,
        forecaster,
        k,
        max_j,
    )?;
    horizons
        .iter()
        .map(|&j| {
            predict_load_pmf(
                &models.kernel,
                &active,
                &intensity,
                &models.selection,
                k,
                j,
                cfg,
            )
        })
        .collect()
}

/// Fits on the events visible at `k` and forecasts every horizon.
pub fn fit_and_forecast(
    log: &EventLog,
    k: Slot,
    horizons: &[Slot],
    fit: &FitConfig,
    cfg: &ForecastConfig,
) -> Result<Vec<ForecastRecord>> {
    let visible = log.visible_at(k);
    let models = fit_models(&visible, fit)?;
    let cfg = ForecastConfig {
        pup: Some(fit.pup.clone()),
        ..cfg.clone()
    };
    forecast_at(&models, log, k, horizons, &fit.volume_forecaster, &cfg)?
        .into_iter()
        .zip(horizons)
        .map(|(f, &j)| ForecastRecord::new(fit.pup.clone(), k, j, f))
        .collect()
}

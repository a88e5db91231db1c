//! Everything derived from the head/source configuration, built once and
//! shared by every scenario and method.

use std::sync::Arc;

use moeaar::headmodel::{build_sensor_array, build_source_space, compute_leadfield, graph_laplacian, HeadModel};
use moeaar::simulator::{build_test_suite, default_regions, Scenario, SuiteOptions};
use moeaar::{Laplacian64, LeadField64, SourceSpace64};

use crate::config::RunConfig;
use crate::error::Result;

pub struct Workbench {
    pub config: RunConfig,
    pub space: SourceSpace64,
    pub leadfield: LeadField64,
    pub laplacian: Arc<Laplacian64>,
    pub regions: Vec<usize>,
}

impl Workbench {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let h = &config.head;
        let space = build_source_space(h.n_sources, h.r_cortex, h.n_rois, h.space_seed)?;
        let sensors = build_sensor_array(h.n_sensors)?;
        let model = HeadModel { radii: h.radii, conductivities: h.conductivities, series_terms: h.series_terms, series_tol: h.series_tol };
        model.validate()?;
        let leadfield = compute_leadfield(&model, &space, &sensors, &space.radial_orientations())?;
        let laplacian = Arc::new(graph_laplacian(&space));
        let regions = default_regions(&space);
        Ok(Self { config: config.clone(), space, leadfield, laplacian, regions })
    }

    pub fn suite(&self, seed: u64) -> Result<Vec<Scenario<f64>>> {
        let s = &self.config.suite;
        let options = SuiteOptions {
            spread: s.spread,
            snr_levels: s.snr.clone(),
            amplitude_range: (s.amplitude_min, s.amplitude_max),
            kinds: s.kinds.clone(),
        };
        Ok(build_test_suite(&self.space, self.leadfield.matrix().view(), &self.regions, seed, &options)?)
    }
}

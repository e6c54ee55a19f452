//! Browser bindings: render synthetic views, train a small forest, look at
//! its per-pixel error with and without backtracking, and stress RANSAC.
//!
//! The [`Demo`] methods wrap plain functions in [`ops`] so everything can be
//! exercised natively.

use wasm_bindgen::prelude::*;

pub mod ops;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen]
pub struct Demo {
    inner: ops::DemoState,
}

#[wasm_bindgen]
impl Demo {
    /// Renders `train_views` training and `test_views` test views of the
    /// room generated from `scene_seed`.
    #[wasm_bindgen(constructor)]
    pub fn new(scene_seed: u32, train_views: u32, test_views: u32) -> Result<Demo, JsError> {
        Ok(Demo {
            inner: ops::DemoState::new(scene_seed as u64, train_views as usize, test_views as usize).map_err(js)?,
        })
    }

    pub fn width(&self) -> u32 {
        self.inner.width()
    }

    pub fn height(&self) -> u32 {
        self.inner.height()
    }

    pub fn test_views(&self) -> u32 {
        self.inner.bench.test.len() as u32
    }

    /// RGBA pixels of test view `index`.
    pub fn view_rgba(&self, index: u32) -> Result<Vec<u8>, JsError> {
        self.inner.view_rgba(index as usize).map_err(js)
    }

    /// RGBA depth visualization of test view `index`.
    pub fn depth_rgba(&self, index: u32) -> Result<Vec<u8>, JsError> {
        self.inner.depth_rgba(index as usize).map_err(js)
    }

    /// Trains the forest; returns a JSON summary of tree sizes.
    pub fn train(&mut self, trees: u32, balanced_depth_limit: u32, pixels_per_view: u32) -> Result<String, JsError> {
        self.inner
            .train(trees as usize, balanced_depth_limit, pixels_per_view as usize)
            .map_err(js)
    }

    /// World-coordinate error map of test view `index` at leaf budget
    /// `n_max`, sampled every `stride` pixels.
    pub fn error_map(&self, index: u32, n_max: u32, stride: u32) -> Result<ErrorMap, JsError> {
        let (rgba, rate) = self
            .inner
            .error_map(index as usize, n_max as usize, stride.max(1) as usize)
            .map_err(js)?;
        Ok(ErrorMap { rgba, inlier_rate: rate })
    }

    /// Relocalizes test view `index`; returns JSON with the pose errors.
    pub fn relocalize(&self, index: u32, n_max: u32, query_budget: u32) -> Result<String, JsError> {
        self.inner
            .relocalize(index as usize, n_max as usize, query_budget as usize)
            .map_err(js)
    }
}

#[wasm_bindgen]
pub struct ErrorMap {
    rgba: Vec<u8>,
    inlier_rate: f64,
}

#[wasm_bindgen]
impl ErrorMap {
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    /// Fraction of predictions within 10 cm.
    pub fn inlier_rate(&self) -> f64 {
        self.inlier_rate
    }
}

/// Preemptive RANSAC on `count` 3D-3D correspondences of which a fraction
/// `outlier_ratio` are random; returns JSON with the outcome.
#[wasm_bindgen]
pub fn ransac_trial(count: u32, outlier_ratio: f64, noise_m: f64, seed: u32) -> Result<String, JsError> {
    ops::ransac_trial(count as usize, outlier_ratio, noise_m, seed as u64).map_err(js)
}

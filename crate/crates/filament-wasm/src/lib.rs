//! Browser bindings for the contour-evolution demo page.
//!
//! The page drives three operations: building a synthetic scene with seed
//! curves, evolving the curves while the image is re-denoised around them,
//! and one-shot denoising at an adjustable fidelity weight. State lives in a
//! [`Demo`] handle owned by the page; images cross the boundary as RGBA
//! buffers and curves as the text snapshot format, which two dozen lines of
//! JavaScript can parse for canvas drawing.

use wasm_bindgen::prelude::*;

use filament::denoiser::denoise;
use filament::energy::discrete_ms_energy;
use filament::evolver::{step, EvolveParams};
use filament::geometry::{write_snapshot, CurveNetwork, Domain};
use filament::imaging::{generate_crack_tip, generate_two_region, GridImage, RegionShape};
use filament::pipeline::{seed_circle, seed_segment};
use filament::topology::{apply, detect_with, TopologyEvent};
use filament::vec2::Vec2;

/// How many evolution steps pass between denoiser refreshes and topology
/// sweeps while the page animates.
const BULK_CADENCE: usize = 10;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// One interactive session: a synthetic scene, its current denoised
/// approximation, and the evolving curve network.
#[wasm_bindgen]
pub struct Demo {
    u0: GridImage,
    u: GridImage,
    network: CurveNetwork,
    h_target: f64,
    steps_taken: usize,
}

#[wasm_bindgen]
impl Demo {
    /// Builds a scene. `scene` is `"crack"` (fading-jump field with a
    /// separator seeded on the midline), `"disk"` (bright disk with a circle
    /// seeded on its rim), or `"halfplane"` (two constants with a circle
    /// seeded across the divide). `noise` adds uniform noise of the given
    /// amplitude with `seed`.
    #[wasm_bindgen(constructor)]
    pub fn new(scene: &str, size: usize, noise: f64, seed: u64) -> Result<Demo, JsError> {
        Demo::build(scene, size, noise, seed).map_err(|msg| JsError::new(&msg))
    }

    /// Advances the evolution `steps` steps at the given weights, refreshing
    /// the denoised field and sweeping for vanished curves every few steps.
    /// Returns the number of curves still alive.
    pub fn evolve(
        &mut self,
        steps: usize,
        sigma: f64,
        lambda: f64,
        dt: f64,
    ) -> Result<usize, JsError> {
        if !(sigma > 0.0 && lambda > 0.0 && dt > 0.0) {
            return Err(JsError::new("sigma, lambda and dt must all be positive"));
        }
        let mut params = EvolveParams::new(sigma, lambda, dt);
        params.h_target = self.h_target;
        for k in 0..steps {
            if self.network.curves.is_empty() {
                break;
            }
            self.network = step(&self.network, &self.u0, &self.u, &params).map_err(js_err)?;
            self.steps_taken += 1;
            if (k + 1) % BULK_CADENCE == 0 || k + 1 == steps {
                // Deletion sweep: curves that shrank below the threshold
                // vanish; other topology events are out of the demo's scope.
                let l_min = 2.0 * self.h_target;
                for event in detect_with(&self.network, 2.0 * self.h_target, l_min) {
                    if matches!(event, TopologyEvent::CurveDelete { .. }) {
                        if let Ok(next) = apply(&self.network, &event) {
                            self.network = next;
                        }
                    }
                }
                self.u = if self.network.curves.is_empty() {
                    self.u0.clone()
                } else {
                    denoise(&self.u0, &self.network, lambda).map_err(js_err)?
                };
            }
        }
        Ok(self.network.curves.len())
    }

    /// Re-solves the denoise problem at `lambda` with the curves held fixed.
    pub fn denoise_once(&mut self, lambda: f64) -> Result<(), JsError> {
        if lambda <= 0.0 {
            return Err(JsError::new("lambda must be positive"));
        }
        self.u = denoise(&self.u0, &self.network, lambda).map_err(js_err)?;
        Ok(())
    }

    /// Current image as RGBA bytes, row-major over the node grid
    /// (`width() * height() * 4` bytes). `denoised` picks u over u0.
    pub fn image_rgba(&self, denoised: bool) -> Vec<u8> {
        let img = if denoised { &self.u } else { &self.u0 };
        let mut rgba = Vec::with_capacity(img.values().len() * 4);
        for &v in img.values() {
            let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            rgba.extend_from_slice(&[g, g, g, 255]);
        }
        rgba
    }

    /// Current curves in the snapshot text format (one `curve` header per
    /// curve followed by `x y` node lines).
    pub fn curves_snapshot(&self) -> String {
        write_snapshot(&self.network)
    }

    /// Total discrete energy of the current state at the given weights.
    pub fn energy(&self, sigma: f64, lambda: f64) -> f64 {
        discrete_ms_energy(&self.network, &self.u, &self.u0, sigma, lambda).total
    }

    /// Node-grid width in samples (image size + 1).
    pub fn width(&self) -> usize {
        self.u0.nx() + 1
    }

    /// Node-grid height in samples (image size + 1).
    pub fn height(&self) -> usize {
        self.u0.ny() + 1
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn curve_count(&self) -> usize {
        self.network.curves.len()
    }
}

/// Error paths keep plain strings internally; only the exported methods wrap
/// them in `JsError`, whose constructor exists solely on wasm targets.
impl Demo {
    fn build(scene: &str, size: usize, noise: f64, seed: u64) -> Result<Demo, String> {
        if !(32..=512).contains(&size) {
            return Err("size must be between 32 and 512".into());
        }
        let s = size as f64;
        let domain = Domain { nx: size, ny: size, h: 1.0 };
        let (u0, network) = match scene {
            "crack" => {
                let img = generate_crack_tip(size, size);
                let seeds = seed_segment(domain, s / 2.0 - 0.5, s / 2.0 - s / 8.0, 4.0)
                    .map_err(|e| e.to_string())?;
                (img, seeds)
            }
            "disk" => {
                let img = generate_two_region(
                    size,
                    size,
                    RegionShape::Disk { center: Vec2::new(s / 2.0, s / 2.0), radius: s / 4.0 },
                    0.8,
                    0.2,
                )
                .map_err(|e| e.to_string())?;
                let seeds = seed_circle(domain, Vec2::new(s / 2.0, s / 2.0), 0.38 * s, 48)
                    .map_err(|e| e.to_string())?;
                (img, seeds)
            }
            "halfplane" => {
                let img = generate_two_region(
                    size,
                    size,
                    RegionShape::HalfPlane { split_x: s / 2.0 + 0.5 },
                    0.7,
                    0.3,
                )
                .map_err(|e| e.to_string())?;
                let seeds = seed_circle(domain, Vec2::new(s / 2.0, s / 2.0), 0.3 * s, 40)
                    .map_err(|e| e.to_string())?;
                (img, seeds)
            }
            other => return Err(format!("unknown scene `{other}`")),
        };
        let u0 = if noise > 0.0 { u0.add_noise(noise, seed) } else { u0 };
        let u = u0.clone();
        Ok(Demo { u0, u, network, h_target: (s / 32.0).clamp(2.0, 4.0), steps_taken: 0 })
    }
}

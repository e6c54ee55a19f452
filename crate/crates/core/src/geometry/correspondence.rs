use nalgebra::{Vector2, Vector3};

/// What the camera observed for a predicted world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    /// Camera-frame 3D point (RGB-D).
    Camera(Vector3<f64>),
    /// Pixel location (RGB).
    Pixel(Vector2<f64>),
}

/// A predicted world point paired with its observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub world: Vector3<f64>,
    pub observation: Observation,
    /// Index of the tree that produced the prediction.
    pub tree: u16,
}

impl Correspondence {
    pub fn camera(world: Vector3<f64>, cam: Vector3<f64>) -> Self {
        Self {
            world,
            observation: Observation::Camera(cam),
            tree: 0,
        }
    }

    pub fn pixel(world: Vector3<f64>, pixel: Vector2<f64>) -> Self {
        Self {
            world,
            observation: Observation::Pixel(pixel),
            tree: 0,
        }
    }

    pub fn with_tree(mut self, tree: u16) -> Self {
        self.tree = tree;
        self
    }

    pub fn is_finite(&self) -> bool {
        let obs_finite = match self.observation {
            Observation::Camera(c) => c.iter().all(|v| v.is_finite()),
            Observation::Pixel(p) => p.iter().all(|v| v.is_finite()),
        };
        obs_finite && self.world.iter().all(|v| v.is_finite())
    }
}

use super::{Correspondence, Intrinsics};

/// Knobs of the isotropic keypoint uncertainty model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyParams {
    /// Standard deviation (px) of a visible keypoint.
    pub sigma_vis: f64,
    /// Standard deviation (px) of an occluded keypoint.
    pub sigma_occ: f64,
    pub conf_floor: f64,
    /// Border band, as a fraction of the smaller image side, inside which variance grows.
    pub edge_margin_frac: f64,
}

impl Default for UncertaintyParams {
    fn default() -> Self {
        Self {
            sigma_vis: 2.0,
            sigma_occ: 8.0,
            conf_floor: 0.1,
            edge_margin_frac: 0.05,
        }
    }
}

/// `sigma_sq = sigma_base_sq * edge_factor * conf_factor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointCovariance {
    pub sigma_sq: f64,
    pub sigma_base_sq: f64,
    pub edge_factor: f64,
    pub conf_factor: f64,
}

impl KeypointCovariance {
    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }
}

pub fn keypoint_covariance(
    corr: &Correspondence,
    k: &Intrinsics,
    params: &UncertaintyParams,
) -> KeypointCovariance {
    let sigma_base_sq = if corr.visible {
        params.sigma_vis * params.sigma_vis
    } else {
        params.sigma_occ * params.sigma_occ
    };
    let (w, h) = (f64::from(k.width), f64::from(k.height));
    let (u, v) = (corr.point2d.x, corr.point2d.y);
    let d = u.min(v).min(w - u).min(h - v).max(0.0);
    let d_margin = params.edge_margin_frac * w.min(h);
    let edge_factor = if d_margin > 0.0 {
        1.0 + (1.0 - d / d_margin).max(0.0)
    } else {
        1.0
    };
    let conf_factor = 1.0 / corr.confidence.max(params.conf_floor);
    KeypointCovariance {
        sigma_sq: sigma_base_sq * edge_factor * conf_factor,
        sigma_base_sq,
        edge_factor,
        conf_factor,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Vector2, Vector3};

    fn corr(u: f64, v: f64, visible: bool, confidence: f64) -> Correspondence {
        Correspondence {
            point3d: Vector3::zeros(),
            point2d: Vector2::new(u, v),
            visible,
            confidence,
        }
    }

    #[test]
    fn formula_examples() {
        let k = Intrinsics::new(1000.0, 1000.0, 500.0, 500.0, 1000, 1000).unwrap();
        let p = UncertaintyParams::default();
        let c = keypoint_covariance(&corr(500.0, 500.0, true, 1.0), &k, &p);
        assert_eq!((c.sigma_sq, c.edge_factor, c.conf_factor), (4.0, 1.0, 1.0));
        let c = keypoint_covariance(&corr(0.0, 500.0, true, 1.0), &k, &p);
        assert_eq!((c.sigma_sq, c.edge_factor), (8.0, 2.0));
        let c = keypoint_covariance(&corr(500.0, 500.0, false, 0.5), &k, &p);
        assert_eq!(c.sigma_sq, 128.0);
        assert_eq!(c.sigma_sq, c.sigma_base_sq * c.edge_factor * c.conf_factor);
    }

    #[test]
    fn edge_band_is_linear_and_clamped() {
        let k = Intrinsics::new(1000.0, 1000.0, 500.0, 500.0, 1000, 1000).unwrap();
        let p = UncertaintyParams::default();
        // d_margin = 50 px
        assert_eq!(
            keypoint_covariance(&corr(25.0, 500.0, true, 1.0), &k, &p).edge_factor,
            1.5
        );
        assert_eq!(
            keypoint_covariance(&corr(50.0, 500.0, true, 1.0), &k, &p).edge_factor,
            1.0
        );
        assert_eq!(
            keypoint_covariance(&corr(-30.0, 500.0, true, 1.0), &k, &p).edge_factor,
            2.0
        );
        assert_eq!(
            keypoint_covariance(&corr(500.0, 500.0, true, 0.0), &k, &p).conf_factor,
            10.0
        );
    }
}

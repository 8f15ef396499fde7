//! Planar homography estimation via the normalized direct linear transform.

use super::PrismError;
use nalgebra::{DMatrix, Matrix3, Vector3};

/// Isotropic normalization: centroid to the origin, mean distance √2.
/// Returns the similarity transform and the transformed points.
fn normalize(points: &[[f64; 2]]) -> (Matrix3<f64>, Vec<[f64; 2]>) {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let s = if mean_dist > 1e-12 { std::f64::consts::SQRT_2 / mean_dist } else { 1.0 };
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let mapped = points
        .iter()
        .map(|p| [s * (p[0] - cx), s * (p[1] - cy)])
        .collect();
    (t, mapped)
}

/// Exact collinearity test for small point sets: any three points spanning
/// (near) zero area make the fit degenerate.
fn has_collinear_triple(points: &[[f64; 2]]) -> bool {
    let scale = points
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let eps = 1e-10 * scale * scale;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            for k in j + 1..points.len() {
                let (a, b, c) = (points[i], points[j], points[k]);
                let area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                if area.abs() < eps {
                    return true;
                }
            }
        }
    }
    false
}

/// Estimate the 3x3 homography mapping model-plane points to image points,
/// normalized so the bottom-right entry is 1.
pub fn estimate_homography(
    model: &[[f64; 2]],
    image: &[[f64; 2]],
) -> Result<Matrix3<f64>, PrismError> {
    let n = model.len();
    if n != image.len() {
        return Err(PrismError::Degenerate(format!(
            "{n} model points but {} image points",
            image.len()
        )));
    }
    if n < 4 {
        return Err(PrismError::NotEnoughPoints { got: n });
    }
    if n == 4 && (has_collinear_triple(model) || has_collinear_triple(image)) {
        return Err(PrismError::Degenerate("three of four points are collinear".into()));
    }
    let (t_model, pm) = normalize(model);
    let (t_image, pi) = normalize(image);

    // Stack the two DLT rows per correspondence; pad with zero rows to at
    // least 9 so the thin SVD still exposes the null-space vector.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (m, im)) in pm.iter().zip(&pi).enumerate() {
        let (x, y) = (m[0], m[1]);
        let (u, v) = (im[0], im[1]);
        let row0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let row1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for (j, val) in row0.into_iter().enumerate() {
            a[(2 * i, j)] = val;
        }
        for (j, val) in row1.into_iter().enumerate() {
            a[(2 * i + 1, j)] = val;
        }
    }
    let svd = a.svd(false, true);
    let sigma = &svd.singular_values;
    // a homography needs the data to fix 8 degrees of freedom
    if sigma[7] < 1e-9 * sigma[0].max(1e-300) {
        return Err(PrismError::Degenerate("correspondences have rank below 8".into()));
    }
    let v_t = svd.v_t.expect("requested");
    let h = v_t.row(v_t.nrows() - 1);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);

    let t_image_inv = t_image
        .try_inverse()
        .expect("similarity transforms are invertible");
    let mut full = t_image_inv * hn * t_model;
    let h22 = full[(2, 2)];
    if h22.abs() < 1e-12 * full.norm() {
        return Err(PrismError::Degenerate("homography has a vanishing scale entry".into()));
    }
    full /= h22;
    // a valid homography is invertible; a vanishing determinant means the
    // correspondences collapse the plane onto a line (e.g. collinear images)
    if full.determinant().abs() < 1e-9 * full.norm().powi(3) {
        return Err(PrismError::Degenerate(
            "homography collapses the plane onto a line".into(),
        ));
    }
    Ok(full)
}

fn project(h: &Matrix3<f64>, p: [f64; 2]) -> [f64; 2] {
    let q = h * Vector3::new(p[0], p[1], 1.0);
    [q.x / q.z, q.y / q.z]
}

/// Root-mean-square symmetric transfer error in pixels. The backward
/// (image-to-model) residuals are in meters, so they are scaled into pixels
/// by the mean image-to-model distance ratio before averaging.
pub fn symmetric_rms_px(
    h: &Matrix3<f64>,
    model: &[[f64; 2]],
    image: &[[f64; 2]],
) -> Result<f64, PrismError> {
    let n = model.len().min(image.len());
    if n == 0 {
        return Err(PrismError::NotEnoughPoints { got: 0 });
    }
    let h_inv = h
        .try_inverse()
        .ok_or_else(|| PrismError::Degenerate("homography is singular".into()))?;
    let spread = |pts: &[[f64; 2]]| {
        let cx = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        let cy = pts.iter().map(|p| p[1]).sum::<f64>() / pts.len() as f64;
        pts.iter()
            .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
            .sum::<f64>()
            / pts.len() as f64
    };
    let model_spread = spread(&model[..n]).max(1e-12);
    let px_per_m = spread(&image[..n]) / model_spread;

    let mut sq_sum = 0.0;
    for (m, im) in model.iter().zip(image).take(n) {
        let fwd = project(h, *m);
        sq_sum += (fwd[0] - im[0]).powi(2) + (fwd[1] - im[1]).powi(2);
        let bwd = project(&h_inv, *im);
        let dm = ((bwd[0] - m[0]).powi(2) + (bwd[1] - m[1]).powi(2)).sqrt() * px_per_m;
        sq_sum += dm * dm;
    }
    Ok((sq_sum / (2 * n) as f64).sqrt())
}

/// Grayscale image buffer, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize) -> Self {
        Raster { width, height, data: vec![0; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> Option<u8> {
        (x < self.width && y < self.height).then(|| self.data[y * self.width + x])
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        if x < self.width && y < self.height {
            self.data[y * self.width + x] = v;
        }
    }
}

/// Resample the sign into a fronto-parallel view by walking the model plane
/// in `px_size_m` steps (2 mm when `None`) and sampling the source image at
/// the homography-mapped position, nearest neighbour. `rect` is the model
/// rectangle (x0, y0, x1, y1) in meters. Pixels mapping outside the source
/// stay black.
pub fn rectify(
    source: &Raster,
    h: &Matrix3<f64>,
    rect: (f64, f64, f64, f64),
    px_size_m: Option<f64>,
) -> Raster {
    let px = px_size_m.unwrap_or(0.002);
    let (x0, y0, x1, y1) = rect;
    let width = (((x1 - x0) / px).round() as usize).max(1);
    let height = (((y1 - y0) / px).round() as usize).max(1);
    let mut out = Raster::new(width, height);
    for row in 0..height {
        for col in 0..width {
            let mx = x0 + (col as f64 + 0.5) * px;
            let my = y0 + (row as f64 + 0.5) * px;
            let [u, v] = project(h, [mx, my]);
            let (ui, vi) = (u.round(), v.round());
            if ui >= 0.0 && vi >= 0.0 {
                if let Some(val) = source.get(ui as usize, vi as usize) {
                    out.set(col, row, val);
                }
            }
        }
    }
    out
}

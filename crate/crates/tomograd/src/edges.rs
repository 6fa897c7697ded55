//! Canny edge extraction from a reconstructed gradient field, plus
//! edge-map scoring.
//!
//! No blur happens here: the smoothing scale is already folded into the
//! gradient reconstruction. Non-maximum suppression quantizes the
//! gradient direction into 8 sectors (4 axes) and suppresses a pixel
//! only when a directional neighbor is strictly greater, so plateaus
//! survive. Hysteresis is the usual two-threshold 8-connected flood
//! fill.

use crate::error::{Error, Result};
use crate::geometry::{gradient_magnitude, EdgeMap, GradientField, ImageGrid};

/// Gradient magnitude with non-maxima along the gradient direction
/// suppressed. Out-of-grid neighbors never suppress.
pub fn nonmax_suppress(gf: &GradientField) -> ImageGrid {
    let mag = gradient_magnitude(gf);
    let n = mag.n();
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let m = mag.get(r, c);
            let g1 = gf.gx.get(r, c);
            let g2 = gf.gy.get(r, c);
            let mut angle = g2.atan2(g1);
            if angle < 0.0 {
                angle += std::f64::consts::PI;
            }
            // nearest of the four axes (sector boundaries at odd
            // multiples of 22.5 degrees); +x2 is -row
            let sector = ((angle * 4.0 / std::f64::consts::PI).round() as usize) % 4;
            let (dr, dc): (isize, isize) = match sector {
                0 => (0, 1),   // x1 axis
                1 => (-1, 1),  // diagonal x1 + x2
                2 => (-1, 0),  // x2 axis
                _ => (-1, -1), // diagonal x2 - x1
            };
            let bigger = |rr: isize, cc: isize| -> bool {
                if rr < 0 || rr >= n as isize || cc < 0 || cc >= n as isize {
                    return false;
                }
                mag.get(rr as usize, cc as usize) > m
            };
            let suppressed =
                bigger(r as isize + dr, c as isize + dc) || bigger(r as isize - dr, c as isize - dc);
            if !suppressed {
                out[r * n + c] = m;
            }
        }
    }
    ImageGrid::from_vec(mag.spec(), out).expect("finite magnitudes stay finite")
}

/// Two-threshold edge linking: pixels `>= high` seed, 8-connected pixels
/// `>= low` are kept, everything else is dropped.
pub fn hysteresis(nms: &ImageGrid, low: f64, high: f64) -> Result<EdgeMap> {
    if !(low >= 0.0) || low > high {
        return Err(Error::InvalidParameter(format!(
            "thresholds must satisfy 0 <= low <= high, got low={low} high={high}"
        )));
    }
    let n = nms.n();
    let mut keep = vec![false; n * n];
    let mut stack = Vec::new();
    for r in 0..n {
        for c in 0..n {
            if nms.get(r, c) >= high && !keep[r * n + c] {
                keep[r * n + c] = true;
                stack.push((r, c));
                while let Some((pr, pc)) = stack.pop() {
                    for dr in -1isize..=1 {
                        for dc in -1isize..=1 {
                            if dr == 0 && dc == 0 {
                                continue;
                            }
                            let rr = pr as isize + dr;
                            let cc = pc as isize + dc;
                            if rr < 0 || rr >= n as isize || cc < 0 || cc >= n as isize {
                                continue;
                            }
                            let (rr, cc) = (rr as usize, cc as usize);
                            if !keep[rr * n + cc] && nms.get(rr, cc) >= low {
                                keep[rr * n + cc] = true;
                                stack.push((rr, cc));
                            }
                        }
                    }
                }
            }
        }
    }
    EdgeMap::new(n, keep)
}

/// Full edge extraction with thresholds given as fractions of the
/// maximum suppressed magnitude, making the result invariant under
/// positive rescaling of the gradient field.
pub fn canny_from_gradient(gf: &GradientField, low_frac: f64, high_frac: f64) -> Result<EdgeMap> {
    if !(0.0..=1.0).contains(&low_frac) || !(0.0..=1.0).contains(&high_frac) || low_frac > high_frac
    {
        return Err(Error::InvalidParameter(format!(
            "threshold fractions must satisfy 0 <= low <= high <= 1, got {low_frac}, {high_frac}"
        )));
    }
    let nms = nonmax_suppress(gf);
    let peak = nms.max_abs();
    if peak == 0.0 {
        return Ok(EdgeMap::empty(nms.n()));
    }
    hysteresis(&nms, low_frac * peak, high_frac * peak)
}

/// Precision, recall and F1 of a predicted edge map against ground
/// truth, with greedy one-to-one matching of edge pixels within
/// `match_radius` (Euclidean, in pixels). An empty prediction scores
/// precision 1, recall 0.
pub fn edge_f1(pred: &EdgeMap, truth: &EdgeMap, match_radius: f64) -> Result<(f64, f64, f64)> {
    if pred.n() != truth.n() {
        return Err(Error::Dimension(format!(
            "edge maps differ in size: {} vs {}",
            pred.n(),
            truth.n()
        )));
    }
    if !(match_radius >= 0.0) {
        return Err(Error::InvalidParameter(
            "match radius must be >= 0".into(),
        ));
    }
    let n = pred.n();
    // candidate offsets sorted by distance, ties row-major
    let reach = match_radius.floor() as isize;
    let mut offsets: Vec<(isize, isize)> = Vec::new();
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            if ((dr * dr + dc * dc) as f64).sqrt() <= match_radius {
                offsets.push((dr, dc));
            }
        }
    }
    offsets.sort_by(|a, b| {
        let da = a.0 * a.0 + a.1 * a.1;
        let db = b.0 * b.0 + b.1 * b.1;
        da.cmp(&db).then(a.cmp(b))
    });

    let mut matched_truth = vec![false; n * n];
    let mut matched = 0usize;
    let mut pred_count = 0usize;
    for r in 0..n {
        for c in 0..n {
            if !pred.get(r, c) {
                continue;
            }
            pred_count += 1;
            for &(dr, dc) in &offsets {
                let rr = r as isize + dr;
                let cc = c as isize + dc;
                if rr < 0 || rr >= n as isize || cc < 0 || cc >= n as isize {
                    continue;
                }
                let idx = rr as usize * n + cc as usize;
                if truth.data()[idx] && !matched_truth[idx] {
                    matched_truth[idx] = true;
                    matched += 1;
                    break;
                }
            }
        }
    }
    let truth_count = truth.count();
    let precision = if pred_count == 0 {
        1.0
    } else {
        matched as f64 / pred_count as f64
    };
    let recall = if truth_count == 0 {
        1.0
    } else {
        matched as f64 / truth_count as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok((precision, recall, f1))
}

/// Fraction of pixels whose gradient magnitude exceeds 10 percent of the
/// peak while lying outside the `band_radius`-pixel band around the true
/// edges. Quantifies streak artifacts.
pub fn spurious_gradient_fraction(
    mag: &ImageGrid,
    truth: &EdgeMap,
    band_radius: f64,
) -> Result<f64> {
    if mag.n() != truth.n() {
        return Err(Error::Dimension(
            "magnitude image and truth edge map differ in size".into(),
        ));
    }
    let n = mag.n();
    let band = dilate(truth, band_radius);
    let threshold = 0.1 * mag.max_abs();
    let mut count = 0usize;
    for i in 0..n * n {
        if mag.data()[i] > threshold && !band[i] {
            count += 1;
        }
    }
    Ok(count as f64 / (n * n) as f64)
}

fn dilate(map: &EdgeMap, radius: f64) -> Vec<bool> {
    let n = map.n();
    let reach = radius.floor() as isize;
    let mut out = vec![false; n * n];
    for r in 0..n {
        for c in 0..n {
            if !map.get(r, c) {
                continue;
            }
            for dr in -reach..=reach {
                for dc in -reach..=reach {
                    if ((dr * dr + dc * dc) as f64).sqrt() > radius {
                        continue;
                    }
                    let rr = r as isize + dr;
                    let cc = c as isize + dc;
                    if rr >= 0 && rr < n as isize && cc >= 0 && cc < n as isize {
                        out[rr as usize * n + cc as usize] = true;
                    }
                }
            }
        }
    }
    out
}

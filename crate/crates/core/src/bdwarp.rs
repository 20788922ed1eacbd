//! Bidirectional distortion warping: rebuilds both RS images of a dual pair
//! from GS frames and the optical flow between them.
//!
//! Formulas are written for top-to-bottom scanning. Bottom-to-top images use
//! the same machinery with every time map and mask flipped upside down, since
//! they are stored in physical row coordinates.

use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::image::{FlowField, Image, TimeMap};
use crate::imaging::ScanDirection;
use crate::warp::backwarp_row;

/// Denominators below this are treated as holes.
pub const HOLE_EPS: f64 = 1e-12;

/// Which GS segment a distortion time map interpolates across.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeKind {
    /// Start to end: `(i - 1) / (H - 1)`.
    StartToEnd,
    /// `1 - StartToEnd`.
    EndToStart,
    /// Start to the row-`m` instant; saturates at 1 below row `m`.
    StartToMid,
    /// Row-`m` instant to end; 0 on rows up to `m`.
    MidToEnd,
}

/// Per-row interpolation time for a top-to-bottom RS image with `rows` rows.
///
/// `m` is the 1-based split row, required for the mid-segment kinds. For
/// `StartToMid` with `m = 1` the first row maps to 0. `MidToEnd` is undefined
/// for `m >= H - 1`.
pub fn distortion_time_map(rows: usize, kind: TimeKind, m: Option<usize>) -> Result<TimeMap> {
    ensure!(
        rows >= 2,
        Degenerate,
        "distortion time map needs at least 2 rows, got {rows}"
    );
    let span = (rows - 1) as f64;
    let s2e = |i: usize| (i - 1) as f64 / span;
    let split = || -> Result<usize> {
        let m = m.ok_or_else(|| crate::Error::Domain("split row required".into()))?;
        ensure!(
            (1..=rows).contains(&m),
            Domain,
            "split row {m} outside 1..={rows}"
        );
        Ok(m)
    };
    let values: Vec<f64> = match kind {
        TimeKind::StartToEnd => (1..=rows).map(s2e).collect(),
        TimeKind::EndToStart => {
            return Ok(distortion_time_map(rows, TimeKind::StartToEnd, None)?.complement());
        }
        TimeKind::StartToMid => {
            let m = split()?;
            (1..=rows)
                .map(|i| match i {
                    _ if i > m => 1.0,
                    _ if m == 1 => 0.0,
                    _ => (i - 1) as f64 / (m - 1) as f64,
                })
                .collect()
        }
        TimeKind::MidToEnd => {
            let m = split()?;
            ensure!(
                m + 1 < rows,
                Degenerate,
                "mid-to-end map is undefined for split row {m} of {rows}"
            );
            (1..=rows)
                .map(|i| {
                    if i <= m {
                        0.0
                    } else {
                        (i - m - 1) as f64 / (rows - m - 1) as f64
                    }
                })
                .collect()
        }
    };
    Ok(TimeMap::new(values.into_iter().map(|v| v as f32).collect()))
}

/// [`distortion_time_map`] oriented for `direction`.
pub fn oriented_time_map(
    rows: usize,
    kind: TimeKind,
    m: Option<usize>,
    direction: ScanDirection,
) -> Result<TimeMap> {
    let t = distortion_time_map(rows, kind, m)?;
    Ok(match direction {
        ScanDirection::TopToBottom => t,
        ScanDirection::BottomToTop => t.reversed(),
    })
}

/// Hard row partition: `true` where a row is rebuilt from the start-to-mid
/// segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeMask {
    rows: Vec<bool>,
    split: usize,
}

impl TimeMask {
    pub fn rows(&self) -> &[bool] {
        &self.rows
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn as_f32(&self) -> Vec<f32> {
        self.rows.iter().map(|&u| u as u8 as f32).collect()
    }
}

/// `U[i] = 1` iff `i <= m` (1-based, top-to-bottom); flipped for b2t.
pub fn time_mask(rows: usize, m: usize, direction: ScanDirection) -> Result<TimeMask> {
    ensure!(
        (1..=rows).contains(&m),
        Domain,
        "split row {m} outside 1..={rows}"
    );
    let mut u: Vec<bool> = (1..=rows).map(|i| i <= m).collect();
    if direction == ScanDirection::BottomToTop {
        u.reverse();
    }
    Ok(TimeMask { rows: u, split: m })
}

/// Time-scaled GS flows feeding the reversal.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorFlows {
    /// `T_s2e * F_s2e`
    pub anchor_s2e: FlowField,
    /// `T_e2s * F_e2s`
    pub anchor_e2s: FlowField,
    /// `T_e2s * F_s2e`
    pub complement_s2e: FlowField,
    /// `T_s2e * F_e2s`
    pub complement_e2s: FlowField,
}

fn check_pair(a: &FlowField, b: &FlowField, t: &TimeMap) -> Result<()> {
    ensure!(
        a.width() == b.width() && a.height() == b.height(),
        Shape,
        "GS flows are {}x{} and {}x{}",
        a.width(),
        a.height(),
        b.width(),
        b.height()
    );
    ensure!(
        t.len() == a.height(),
        Shape,
        "time map has {} rows, flows have {}",
        t.len(),
        a.height()
    );
    Ok(())
}

pub fn anchor_and_complementary_flows(
    fg_s2e: &FlowField,
    fg_e2s: &FlowField,
    t_s2e: &TimeMap,
) -> Result<AnchorFlows> {
    check_pair(fg_s2e, fg_e2s, t_s2e)?;
    let t_e2s = t_s2e.complement();
    Ok(AnchorFlows {
        anchor_s2e: fg_s2e.scale_rows(t_s2e)?,
        anchor_e2s: fg_e2s.scale_rows(&t_e2s)?,
        complement_s2e: fg_s2e.scale_rows(&t_e2s)?,
        complement_e2s: fg_e2s.scale_rows(t_s2e)?,
    })
}

/// Complementary flow reversal with row-varying time.
///
/// Returns flows anchored at RS pixels pointing into the start and end GS
/// frames. Both carry the same hole mask: pixels whose combined splat
/// weight `T_e2s * sum(w1) + T_s2e * sum(w2)` vanishes. Holes are filled with
/// `-T_s2e * F_s2e` and `-T_e2s * F_e2s`.
pub fn cfr_reverse(
    fg_s2e: &FlowField,
    fg_e2s: &FlowField,
    t_s2e: &TimeMap,
    sigma: f64,
) -> Result<(FlowField, FlowField)> {
    ensure!(
        fg_s2e.is_finite() && fg_e2s.is_finite(),
        Domain,
        "GS flows contain non-finite vectors"
    );
    check_pair(fg_s2e, fg_e2s, t_s2e)?;
    ensure!(
        sigma.is_finite() && sigma > 0.0,
        Domain,
        "splat sigma must be positive, got {sigma}"
    );
    let (w, h) = (fg_s2e.width(), fg_s2e.height());

    // N1: sources pushed by the s2e anchor, N2: sources pushed by the e2s
    // anchor. Each accumulates its weight, its anchor and its complement.
    let n1 = splat_scaled(fg_s2e, t_s2e, false, sigma);
    let n2 = splat_scaled(fg_e2s, t_s2e, true, sigma);

    let mut to_start = Vec::with_capacity(w * h);
    let mut to_end = Vec::with_capacity(w * h);
    let mut holes = Vec::with_capacity(w * h);
    for y in 0..h {
        let ts = t_s2e[y] as f64;
        let te = 1.0 - ts;
        for x in 0..w {
            let i = y * w + x;
            let (w1, n1_anchor, n1_complement) = (n1[i].weight, n1[i].anchor, n1[i].complement);
            let (w2, n2_anchor, n2_complement) = (n2[i].weight, n2[i].anchor, n2[i].complement);
            let den = te * w1 + ts * w2;
            if den < HOLE_EPS {
                let [su, sv] = fg_s2e.get(x, y);
                let [eu, ev] = fg_e2s.get(x, y);
                to_start.push([(-ts * su as f64) as f32, (-ts * sv as f64) as f32]);
                to_end.push([(-te * eu as f64) as f32, (-te * ev as f64) as f32]);
                holes.push(true);
                continue;
            }
            let s = |k: usize| (ts * n2_complement[k] - te * n1_anchor[k]) / den;
            let e = |k: usize| (te * n1_complement[k] - ts * n2_anchor[k]) / den;
            to_start.push([s(0) as f32, s(1) as f32]);
            to_end.push([e(0) as f32, e(1) as f32]);
            holes.push(false);
        }
    }
    Ok((
        FlowField::from_vec(w, h, to_start)?.with_holes(holes.clone())?,
        FlowField::from_vec(w, h, to_end)?.with_holes(holes)?,
    ))
}

#[derive(Debug, Clone, Copy, Default)]
struct SplatCell {
    weight: f64,
    anchor: [f64; 2],
    complement: [f64; 2],
}

/// Forward splat of a GS flow scaled row-wise by `T` (the anchor) along
/// itself, accumulating the anchor and the `1 - T` scaled complement. With
/// `flip` the roles of `T` and `1 - T` swap.
///
/// Same targets, weights and source order as [`crate::warp::SplatPlan`].
fn splat_scaled(flow: &FlowField, t: &TimeMap, flip: bool, sigma: f64) -> Vec<SplatCell> {
    let (w, h) = (flow.width(), flow.height());
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut cells = alloc::vec![SplatCell::default(); w * h];
    for y in 0..h {
        let (ta, tc) = if flip {
            (1.0 - t[y], t[y])
        } else {
            (t[y], 1.0 - t[y])
        };
        for x in 0..w {
            let [u, v] = flow.get(x, y);
            let anchor = [(ta * u) as f64, (ta * v) as f64];
            let px = x as f64 + anchor[0];
            let py = y as f64 + anchor[1];
            // Rounding half away from zero lands inside the grid exactly when
            // the point lies in (-0.5, n - 0.5); there it equals floor(p + 0.5).
            if !(px > -0.5 && py > -0.5 && px < w as f64 - 0.5 && py < h as f64 - 0.5) {
                continue;
            }
            let (ix, iy) = ((px + 0.5) as i32, (py + 0.5) as i32);
            let (tx, ty) = (ix as f64, iy as f64);
            let d2 = (tx - px) * (tx - px) + (ty - py) * (ty - py);
            let wt = libm::exp(-d2 * inv);
            let cell = &mut cells[iy as usize * w + ix as usize];
            cell.weight += wt;
            cell.anchor[0] += wt * anchor[0];
            cell.anchor[1] += wt * anchor[1];
            cell.complement[0] += wt * (tc * u) as f64;
            cell.complement[1] += wt * (tc * v) as f64;
        }
    }
    cells
}

/// A rebuilt RS image plus the pixels whose flow came from hole filling.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub pixels: Image,
    pub holes: Vec<bool>,
    pub direction: ScanDirection,
}

impl Reconstruction {
    pub fn hole_fraction(&self) -> f64 {
        self.holes.iter().filter(|&&b| b).count() as f64 / self.holes.len() as f64
    }
}

/// Blends two GS frames through reversed flows with a per-row time map,
/// `(1 - T) * B(a; F_rs->a) + T * B(b; F_rs->b)`, writing the rows selected by
/// `rows` (all when `None`) into `out` and `holes`.
#[allow(clippy::too_many_arguments)]
fn blend_segment(
    gs_a: &Image,
    gs_b: &Image,
    fg_ab: &FlowField,
    fg_ba: &FlowField,
    t_ab: &TimeMap,
    sigma: f64,
    rows: Option<&[bool]>,
    out: &mut Image,
    holes: &mut [bool],
) -> Result<()> {
    gs_a.check_same_shape(gs_b, "GS frames")?;
    ensure!(
        fg_ab.width() == gs_a.width() && fg_ab.height() == gs_a.height(),
        Shape,
        "GS flow is {}x{}, frames are {}x{}",
        fg_ab.width(),
        fg_ab.height(),
        gs_a.width(),
        gs_a.height()
    );
    let (to_a, to_b) = cfr_reverse(fg_ab, fg_ba, t_ab, sigma)?;
    let (w, c) = (gs_a.width(), gs_a.channels());
    let mut wb = alloc::vec![0.0f32; w * c];
    let hole_map = to_a.holes().expect("reversal marks holes");
    for y in 0..gs_a.height() {
        if rows.is_some_and(|r| !r[y]) {
            continue;
        }
        let t = t_ab[y];
        let row = out.row_mut(y);
        backwarp_row(gs_a, &to_a, y, row);
        if t != 0.0 {
            backwarp_row(gs_b, &to_b, y, &mut wb);
            for (o, b) in row.iter_mut().zip(&wb) {
                *o = (*o + t * (b - *o)).clamp(0.0, 1.0);
            }
        } else {
            row.iter_mut().for_each(|o| *o = o.clamp(0.0, 1.0));
        }
        holes[y * w..(y + 1) * w].copy_from_slice(&hole_map[y * w..(y + 1) * w]);
    }
    Ok(())
}

fn empty_output(like: &Image) -> (Image, Vec<bool>) {
    (
        Image::new(like.width(), like.height(), like.channels()),
        alloc::vec![false; like.width() * like.height()],
    )
}

/// Rebuilds the RS image scanned in `direction` from the GS frames at the
/// first and last readout instants and the flows between them.
pub fn reconstruct_rs_endpoints(
    gs_start: &Image,
    gs_end: &Image,
    fg_s2e: &FlowField,
    fg_e2s: &FlowField,
    direction: ScanDirection,
    sigma: f64,
) -> Result<Reconstruction> {
    let t = oriented_time_map(gs_start.height(), TimeKind::StartToEnd, None, direction)?;
    let (mut pixels, mut holes) = empty_output(gs_start);
    blend_segment(
        gs_start,
        gs_end,
        fg_s2e,
        fg_e2s,
        &t,
        sigma,
        None,
        &mut pixels,
        &mut holes,
    )?;
    Ok(Reconstruction {
        pixels,
        holes,
        direction,
    })
}

/// GS flows between a pair of frames, forward and backward.
#[derive(Debug, Clone, Copy)]
pub struct FlowPair<'a> {
    pub forward: &'a FlowField,
    pub backward: &'a FlowField,
}

/// Rebuilds the RS image scanned in `direction` from GS frames at the first,
/// row-`m` and last instants.
///
/// Rows exposed up to instant `m` come from the (start, mid) segment, the rest
/// from (mid, end). At the degenerate splits the whole image is routed through
/// one segment: `m = 1` through (mid, end), `m >= H - 1` through (start, mid).
#[allow(clippy::too_many_arguments)]
pub fn reconstruct_rs_intermediate(
    gs_start: &Image,
    gs_mid: &Image,
    gs_end: &Image,
    start_mid: FlowPair<'_>,
    mid_end: FlowPair<'_>,
    m: usize,
    direction: ScanDirection,
    sigma: f64,
) -> Result<Reconstruction> {
    let rows = gs_start.height();
    ensure!(rows >= 2, Degenerate, "need at least 2 rows, got {rows}");
    ensure!(
        (1..=rows).contains(&m),
        Degenerate,
        "split row {m} outside 1..={rows}"
    );
    gs_start.check_same_shape(gs_mid, "GS start/mid frames")?;
    gs_start.check_same_shape(gs_end, "GS start/end frames")?;

    let use_first = m > 1;
    let use_second = m + 1 < rows;
    let mask = time_mask(rows, m, direction)?;
    let first_rows: Vec<bool> = mask.rows().iter().map(|&u| u || !use_second).collect();
    let second_rows: Vec<bool> = mask.rows().iter().map(|&u| !u || !use_first).collect();
    let (mut pixels, mut holes) = empty_output(gs_start);
    if use_first {
        let t = oriented_time_map(rows, TimeKind::StartToMid, Some(m), direction)?;
        blend_segment(
            gs_start,
            gs_mid,
            start_mid.forward,
            start_mid.backward,
            &t,
            sigma,
            Some(&first_rows),
            &mut pixels,
            &mut holes,
        )?;
    }
    if use_second {
        let t = oriented_time_map(rows, TimeKind::MidToEnd, Some(m), direction)?;
        blend_segment(
            gs_mid,
            gs_end,
            mid_end.forward,
            mid_end.backward,
            &t,
            sigma,
            Some(&second_rows),
            &mut pixels,
            &mut holes,
        )?;
    }
    Ok(Reconstruction {
        pixels,
        holes,
        direction,
    })
}

use super::{check_render_target, sorted_splats, GaussianScene, Splat, ALPHA_THRESHOLD};
use crate::camera::CameraView;
use crate::error::Result;
use crate::frame::FrameBuffer;

pub const TILE_SIZE: usize = 16;

struct TileGrid {
    cols: usize,
    rows: usize,
}

impl TileGrid {
    fn new(width: usize, height: usize) -> Self {
        Self {
            cols: width.div_ceil(TILE_SIZE),
            rows: height.div_ceil(TILE_SIZE),
        }
    }

    /// Inclusive tile range whose pixel centers may lie within `extent` of `center`.
    fn covered(&self, center: [f64; 2], extent: f64, width: usize, height: usize) -> Option<[usize; 4]> {
        // Pixel x has its center at x + 0.5.
        let lo_x = (center[0] - extent - 0.5).ceil().max(0.0);
        let hi_x = (center[0] + extent - 0.5).floor().min(width as f64 - 1.0);
        let lo_y = (center[1] - extent - 0.5).ceil().max(0.0);
        let hi_y = (center[1] + extent - 0.5).floor().min(height as f64 - 1.0);
        if !(lo_x <= hi_x && lo_y <= hi_y) {
            return None;
        }
        Some([
            lo_x as usize / TILE_SIZE,
            hi_x as usize / TILE_SIZE,
            lo_y as usize / TILE_SIZE,
            hi_y as usize / TILE_SIZE,
        ])
    }
}

/// Front-to-back alpha compositing of one pixel over the splats in `order`.
#[inline]
pub(crate) fn composite<'a>(
    splats: impl IntoIterator<Item = &'a Splat>,
    px: f64,
    py: f64,
    background: [f64; 3],
) -> [f64; 3] {
    let mut rgb = [0.0; 3];
    let mut transmittance = 1.0;
    for s in splats {
        let alpha = s.alpha_at(px, py);
        if alpha < ALPHA_THRESHOLD {
            continue;
        }
        let w = alpha * transmittance;
        for c in 0..3 {
            rgb[c] += s.color[c] * w;
        }
        transmittance *= 1.0 - alpha;
        if transmittance < ALPHA_THRESHOLD {
            break;
        }
    }
    for c in 0..3 {
        rgb[c] += transmittance * background[c];
    }
    rgb
}

fn render_tile(splats: &[Splat], ids: &[u32], tile: usize, grid: &TileGrid, width: usize, height: usize, background: [f64; 3]) -> Vec<f64> {
    let x0 = (tile % grid.cols) * TILE_SIZE;
    let y0 = (tile / grid.cols) * TILE_SIZE;
    let x1 = (x0 + TILE_SIZE).min(width);
    let y1 = (y0 + TILE_SIZE).min(height);
    let mut out = Vec::with_capacity((x1 - x0) * (y1 - y0) * 3);
    for y in y0..y1 {
        for x in x0..x1 {
            let rgb = composite(
                ids.iter().map(|&i| &splats[i as usize]),
                x as f64 + 0.5,
                y as f64 + 0.5,
                background,
            );
            out.extend_from_slice(&rgb);
        }
    }
    out
}

/// Tile-based forward rasterizer.
///
/// Splats are depth-sorted once, binned into the 16x16 tiles their cutoff
/// square touches, and every tile composites its pixels independently.
/// Output is identical regardless of how tiles are scheduled.
pub fn rasterize(scene: &GaussianScene, view: &CameraView, width: usize, height: usize) -> Result<FrameBuffer> {
    check_render_target(width, height)?;
    let grid = TileGrid::new(width, height);
    let splats = sorted_splats(scene, view);

    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); grid.cols * grid.rows];
    for (i, s) in splats.iter().enumerate() {
        let Some(extent) = s.extent() else { continue };
        let Some([tx0, tx1, ty0, ty1]) = grid.covered(s.center, extent, width, height) else {
            continue;
        };
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                bins[ty * grid.cols + tx].push(i as u32);
            }
        }
    }

    let background = scene.background;
    let render = |(tile, ids): (usize, &Vec<u32>)| render_tile(&splats, ids, tile, &grid, width, height, background);
    #[cfg(feature = "parallel")]
    let tiles: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        bins.par_iter().enumerate().map(render).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let tiles: Vec<Vec<f64>> = bins.iter().enumerate().map(render).collect();

    let mut frame = FrameBuffer::new(width, height);
    let data = frame.data_mut();
    for (tile, pixels) in tiles.iter().enumerate() {
        let x0 = (tile % grid.cols) * TILE_SIZE;
        let y0 = (tile / grid.cols) * TILE_SIZE;
        let tw = (x0 + TILE_SIZE).min(width) - x0;
        for (row, chunk) in pixels.chunks_exact(tw * 3).enumerate() {
            let start = ((y0 + row) * width + x0) * 3;
            data[start..start + tw * 3].copy_from_slice(chunk);
        }
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{Extrinsics, Intrinsics};
    use crate::gaussian::{rasterize_reference, GaussianPrimitive};
    use nalgebra::Vector3;

    fn view(w: usize, h: usize) -> CameraView {
        CameraView::new(Extrinsics::identity(), Intrinsics::from_normalized(1.0, w, h).unwrap())
    }

    fn blob(z: f64, scale: f64, opacity: f64, rgb: [f64; 3]) -> GaussianPrimitive {
        GaussianPrimitive::solid(Vector3::new(0.0, 0.0, z), Vector3::repeat(scale), opacity, rgb, 0)
    }

    #[test]
    fn empty_scene_is_background() {
        let scene = GaussianScene::empty(1).with_background([0.2, 0.4, 0.6]);
        let fb = rasterize(&scene, &view(20, 10), 20, 10).unwrap();
        assert!(fb.data().chunks(3).all(|p| p == [0.2, 0.4, 0.6]));
    }

    #[test]
    fn rejects_empty_target() {
        assert!(rasterize(&GaussianScene::empty(0), &view(4, 4), 0, 4).is_err());
    }

    #[test]
    fn opaque_center_shows_its_color() {
        let scene = GaussianScene::new(0, vec![blob(2.0, 0.3, 1.0, [0.9, 0.3, 0.1])]).unwrap();
        let v = view(32, 32);
        let fb = rasterize(&scene, &v, 32, 32).unwrap();
        let oracle = rasterize_reference(&scene, &v, 32, 32).unwrap();
        let got = fb.pixel(16, 16);
        assert_eq!(got, oracle.pixel(16, 16));
        for (g, want) in got.iter().zip([0.9, 0.3, 0.1]) {
            assert!((g - want).abs() <= 0.01, "{got:?}");
        }
    }

    #[test]
    fn nearer_opaque_splat_wins() {
        let red = blob(1.0, 0.2, 1.0, [1.0, 0.0, 0.0]);
        let blue = blob(2.0, 0.4, 1.0, [0.0, 0.0, 1.0]);
        for prims in [vec![red.clone(), blue.clone()], vec![blue, red]] {
            let scene = GaussianScene::new(0, prims).unwrap();
            let v = view(32, 32);
            let p = rasterize(&scene, &v, 32, 32).unwrap().pixel(16, 16);
            assert_eq!(p, rasterize_reference(&scene, &v, 32, 32).unwrap().pixel(16, 16));
            assert!(p[0] > 0.98 && p[2] < 0.02, "{p:?}");
        }
    }

    #[test]
    fn transmittance_bookkeeping() {
        let scene = GaussianScene::new(0, vec![blob(2.0, 0.2, 0.5, [1.0, 1.0, 1.0])])
            .unwrap()
            .with_background([0.0, 0.0, 1.0]);
        let fb = rasterize(&scene, &view(32, 32), 32, 32).unwrap();
        // White over blue: the blue channel is alpha + (1 - alpha) = 1 everywhere,
        // red holds the accumulated alpha.
        for p in fb.data().chunks(3) {
            assert!((0.0..=1.0).contains(&p[0]));
            assert!((p[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn raising_opacity_never_lowers_weight() {
        let v = view(24, 24);
        let mut prev: Option<FrameBuffer> = None;
        for step in 0..=20 {
            let o = f64::from(step) / 20.0;
            let scene = GaussianScene::new(0, vec![blob(3.0, 0.15, o, [1.0; 3])]).unwrap();
            let fb = rasterize(&scene, &v, 24, 24).unwrap();
            if let Some(p) = &prev {
                assert!(fb.data().iter().zip(p.data()).all(|(a, b)| a >= b));
            }
            prev = Some(fb);
        }
    }

    #[test]
    fn non_multiple_of_tile_size() {
        let scene = GaussianScene::new(0, vec![blob(2.0, 0.5, 0.8, [0.5, 0.6, 0.7])]).unwrap();
        let v = view(37, 19);
        let a = rasterize(&scene, &v, 37, 19).unwrap();
        let b = rasterize_reference(&scene, &v, 37, 19).unwrap();
        assert_eq!(a, b);
    }
}

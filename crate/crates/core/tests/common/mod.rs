//! Independent brute-force splatting oracle, written against plain arrays.

#![allow(dead_code)]

use splatstream::camera::CameraView;
use splatstream::gaussian::GaussianScene;
use splatstream::FrameBuffer;

type V3 = [f64; 3];
type M3 = [[f64; 3]; 3];

const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;

fn quat_matrix([w, x, y, z]: [f64; 4]) -> M3 {
    let n = (w * w + x * x + y * y + z * z).sqrt();
    let (w, x, y, z) = (w / n, x / n, y / n, z / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn mul(a: &M3, b: &M3) -> M3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose(a: &M3) -> M3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

fn apply(a: &M3, v: V3) -> V3 {
    [0, 1, 2].map(|i| a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2])
}

struct Footprint {
    depth: f64,
    index: usize,
    u: f64,
    v: f64,
    inv: [f64; 3],
    color: V3,
    opacity: f64,
}

/// Straight evaluation of every primitive at every pixel center.
pub fn render(scene: &GaussianScene, view: &CameraView, width: usize, height: usize) -> FrameBuffer {
    let r: M3 = {
        let m = view.extrinsics.rotation();
        [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]])
    };
    let t = *view.extrinsics.translation();
    let k = view.intrinsics;
    // Camera center C = -R^T t.
    let rt = transpose(&r);
    let c = apply(&rt, [-t.x, -t.y, -t.z]);

    let mut fps: Vec<Footprint> = Vec::new();
    for (index, g) in scene.primitives().iter().enumerate() {
        let mean = [g.mean.x, g.mean.y, g.mean.z];
        let pc = apply(&r, mean);
        let p = [pc[0] + t.x, pc[1] + t.y, pc[2] + t.z];
        if p[2] <= 1e-4 {
            continue;
        }
        let rot = quat_matrix(g.rotation.to_array());
        let s = [g.scale.x, g.scale.y, g.scale.z];
        let mut rs = rot;
        for row in &mut rs {
            for j in 0..3 {
                row[j] *= s[j];
            }
        }
        let sigma = mul(&rs, &transpose(&rs));
        let j: [[f64; 3]; 2] = [
            [k.focal_x / p[2], 0.0, -k.focal_x * p[0] / (p[2] * p[2])],
            [0.0, k.focal_y / p[2], -k.focal_y * p[1] / (p[2] * p[2])],
        ];
        // T = J R (2x3), cov2 = T Sigma T^T.
        let tm: [[f64; 3]; 2] = [0, 1].map(|i| [0, 1, 2].map(|col| (0..3).map(|m| j[i][m] * r[m][col]).sum()));
        let ts: [[f64; 3]; 2] = [0, 1].map(|i| [0, 1, 2].map(|col| (0..3).map(|m| tm[i][m] * sigma[m][col]).sum()));
        let cov = |a: usize, b: usize| -> f64 { (0..3).map(|m| ts[a][m] * tm[b][m]).sum() };
        let (ca, cb, cc) = (cov(0, 0) + 0.3, cov(0, 1), cov(1, 1) + 0.3);
        let det = ca * cc - cb * cb;
        if det <= 0.0 {
            continue;
        }
        let d = [g.mean.x - c[0], g.mean.y - c[1], g.mean.z - c[2]];
        let dn = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let (x, y, z) = (d[0] / dn, d[1] / dn, d[2] / dn);
        let color = [0, 1, 2].map(|ch| {
            let mut v = SH_C0 * g.sh[ch];
            if scene.sh_degree() >= 1 {
                v += -SH_C1 * y * g.sh[3 + ch] + SH_C1 * z * g.sh[6 + ch] - SH_C1 * x * g.sh[9 + ch];
            }
            (v + 0.5).clamp(0.0, 1.0)
        });
        fps.push(Footprint {
            depth: p[2],
            index,
            u: k.focal_x * p[0] / p[2] + k.c_x,
            v: k.focal_y * p[1] / p[2] + k.c_y,
            inv: [cc / det, -cb / det, ca / det],
            color,
            opacity: g.opacity,
        });
    }
    fps.sort_by(|a, b| a.depth.partial_cmp(&b.depth).unwrap().then(a.index.cmp(&b.index)));

    let bg = scene.background;
    FrameBuffer::from_fn(width, height, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let mut acc = [0.0; 3];
        let mut trans = 1.0;
        for f in &fps {
            let (dx, dy) = (px - f.u, py - f.v);
            let q = f.inv[0] * dx * dx + 2.0 * f.inv[1] * dx * dy + f.inv[2] * dy * dy;
            let alpha = (f.opacity * (-0.5 * q).exp()).min(0.99);
            if alpha < 1.0 / 255.0 {
                continue;
            }
            for ch in 0..3 {
                acc[ch] += f.color[ch] * alpha * trans;
            }
            trans *= 1.0 - alpha;
            if trans < 1.0 / 255.0 {
                break;
            }
        }
        [0, 1, 2].map(|ch| acc[ch] + trans * bg[ch])
    })
}

/// Rotation about a unit axis by Rodrigues' formula.
pub fn rodrigues(axis: V3, angle: f64) -> M3 {
    let (s, c) = angle.sin_cos();
    let [x, y, z] = axis;
    let k: M3 = [[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]];
    let k2 = mul(&k, &k);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = f64::from(u8::from(i == j)) + s * k[i][j] + (1.0 - c) * k2[i][j];
        }
    }
    out
}

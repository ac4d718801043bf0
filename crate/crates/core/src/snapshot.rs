//! `GSC1` scene snapshots.
//!
//! Little-endian: magic `GSC1`, u32 primitive count, u8 SH degree, then per
//! primitive 3 f32 mean, 4 f32 quaternion (w, x, y, z), 3 f32 scale,
//! f32 opacity and `3 (degree + 1)^2` f32 SH coefficients. Values are stored
//! at single precision.

use std::io::{Read, Write};

use nalgebra::Vector3;

use crate::camera::Quaternion;
use crate::error::{Error, Result};
use crate::gaussian::{sh, GaussianPrimitive, GaussianScene};

pub const MAGIC: [u8; 4] = *b"GSC1";

pub fn write_snapshot<W: Write>(scene: &GaussianScene, mut w: W) -> Result<()> {
    let count = u32::try_from(scene.len()).map_err(|_| Error::invalid("too many primitives for a snapshot"))?;
    w.write_all(&MAGIC)?;
    w.write_all(&count.to_le_bytes())?;
    w.write_all(&[scene.sh_degree()])?;
    let mut buf = Vec::with_capacity(4 * (11 + sh::coeffs_len(scene.sh_degree())));
    for g in scene.primitives() {
        buf.clear();
        let q = g.rotation.to_array();
        let values = g
            .mean
            .iter()
            .chain(&q)
            .chain(g.scale.iter())
            .chain([&g.opacity])
            .chain(&g.sh);
        for &v in values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<GaussianScene> {
    let mut header = [0u8; 9];
    r.read_exact(&mut header)?;
    if header[..4] != MAGIC {
        return Err(Error::Protocol(format!("not a GSC1 snapshot (magic {:?})", &header[..4])));
    }
    let count = u32::from_le_bytes([header[4], header[5], header[6], header[7]]) as usize;
    let degree = header[8];
    if degree > sh::MAX_SH_DEGREE {
        return Err(Error::Protocol(format!("snapshot SH degree {degree} is unsupported")));
    }
    let per = 11 + sh::coeffs_len(degree);
    let mut raw = vec![0u8; 4 * per];
    let mut primitives = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        r.read_exact(&mut raw)?;
        let v: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        primitives.push(GaussianPrimitive {
            mean: Vector3::new(v[0], v[1], v[2]),
            rotation: Quaternion::new(v[3], v[4], v[5], v[6]),
            scale: Vector3::new(v[7], v[8], v[9]),
            opacity: v[10],
            sh: v[11..].to_vec(),
        });
    }
    GaussianScene::new(degree, primitives)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{SyntheticScene, SyntheticSceneSpec};
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let scene = GaussianScene::new(
            0,
            vec![GaussianPrimitive::solid(Vector3::new(1.0, 2.0, 3.0), Vector3::repeat(0.5), 0.25, [0.5; 3], 0)],
        )
        .unwrap();
        let mut bytes = Vec::new();
        write_snapshot(&scene, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 9 + 4 * 14);
        assert_eq!(&bytes[..9], b"GSC1\x01\x00\x00\x00\x00");
        assert_eq!(&bytes[9..13], &1.0f32.to_le_bytes());
        assert_eq!(read_snapshot(bytes.as_slice()).unwrap(), scene);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_snapshot(&b"GSC2\0\0\0\0\0"[..]).is_err());
        assert!(read_snapshot(&b"GSC1\x01\0\0\0\x00\0\0"[..]).is_err());
        assert!(read_snapshot(&b"GSC1\0\0\0\0\x09"[..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trips_at_single_precision(seed: u64, n in 1usize..40, degree in 0u8..=3) {
            let scene = SyntheticScene::new(SyntheticSceneSpec {
                seed,
                num_gaussians: n,
                sh_degree: degree,
                ..SyntheticSceneSpec::default()
            })
            .unwrap()
            .scene(3);
            let mut bytes = Vec::new();
            write_snapshot(&scene, &mut bytes).unwrap();
            prop_assert_eq!(bytes.len(), 9 + n * 4 * (11 + 3 * (usize::from(degree) + 1).pow(2)));
            let back = read_snapshot(bytes.as_slice()).unwrap();
            prop_assert_eq!(back.len(), n);
            for (a, b) in scene.primitives().iter().zip(back.primitives()) {
                prop_assert!((a.mean - b.mean).amax() < 1e-6);
                prop_assert!((a.scale - b.scale).amax() < 1e-6);
                prop_assert!((a.opacity - b.opacity).abs() < 1e-6);
                prop_assert!(a.sh.iter().zip(&b.sh).all(|(x, y)| (x - y).abs() < 1e-6));
            }
            let mut again = Vec::new();
            write_snapshot(&back, &mut again).unwrap();
            prop_assert_eq!(bytes, again);
        }
    }
}

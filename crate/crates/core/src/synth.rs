//! Deterministic synthetic scenes with exact ground truth and clean plates.
//!
//! Backgrounds are procedural value-noise textures over an unbounded plane,
//! so a panning camera sees new content at the frame edge and every frame
//! has an exact clean plate.

use serde::{Deserialize, Serialize};

use crate::imaging::{Frame, MaskFrame};

/// Smooth multi-octave value noise, deterministic in `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Texture {
    pub seed: u64,
    pub base: f32,
    /// (cell size in pixels, amplitude in gray levels) per octave.
    pub octaves: Vec<(f32, f32)>,
}

impl Texture {
    /// Low-contrast background: peak-to-peak under 30 gray levels.
    pub fn background(seed: u64) -> Self {
        Self {
            seed,
            base: 110.0,
            octaves: vec![(12.0, 8.0), (5.0, 5.0)],
        }
    }

    /// High-contrast texture for flow accuracy checks.
    pub fn strong(seed: u64) -> Self {
        Self {
            seed,
            base: 128.0,
            octaves: vec![(16.0, 50.0), (6.0, 30.0), (3.0, 12.0)],
        }
    }

    pub fn amplitude(&self) -> f32 {
        self.octaves.iter().map(|o| o.1).sum()
    }

    /// Value at continuous plane coordinates for channel `c`.
    pub fn value(&self, x: f32, y: f32, c: usize) -> f32 {
        let mut v = self.base;
        for (k, &(cell, amp)) in self.octaves.iter().enumerate() {
            let salt = self
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((k as u64) << 40)
                .wrapping_add((c as u64) << 52);
            v += amp * value_noise(x / cell, y / cell, salt);
        }
        v
    }

    pub fn render(&self, width: usize, height: usize, channels: usize, dx: f32, dy: f32) -> Frame {
        Frame::from_fn(width, height, channels, |x, y, c| {
            let v = self.value(x as f32 + dx, y as f32 + dy, c);
            (v + 0.5).floor().clamp(0.0, 255.0) as u8
        })
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice(ix: i64, iy: i64, salt: u64) -> f32 {
    let h = splitmix(
        salt ^ splitmix((ix as u64).wrapping_mul(0x1F1F_1F1F) ^ (iy as u64).rotate_left(32)),
    );
    (h >> 40) as f32 / (1u64 << 24) as f32 * 2.0 - 1.0
}

fn value_noise(x: f32, y: f32, salt: u64) -> f32 {
    let x0 = x.floor();
    let y0 = y.floor();
    let (ix, iy) = (x0 as i64, y0 as i64);
    let s = |t: f32| t * t * (3.0 - 2.0 * t);
    let tx = s(x - x0);
    let ty = s(y - y0);
    let a = lattice(ix, iy, salt);
    let b = lattice(ix + 1, iy, salt);
    let c = lattice(ix, iy + 1, salt);
    let d = lattice(ix + 1, iy + 1, salt);
    let top = a + (b - a) * tx;
    let bot = c + (d - c) * tx;
    top + (bot - top) * ty
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    /// Static camera, one moving box.
    Static,
    /// Camera panning `speed` px/frame, one moving box.
    Pan,
    /// Static camera, an object parked for the first 80 frames, then gone.
    StaticGhost,
}

impl std::str::FromStr for SceneKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(Self::Static),
            "pan" => Ok(Self::Pan),
            "static-ghost" => Ok(Self::StaticGhost),
            other => Err(format!(
                "unknown scene {other:?} (expected static, pan, static-ghost)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub width: usize,
    pub height: usize,
    pub length: usize,
    pub seed: u64,
    /// Pan speed in px/frame (pan scene only). Background content moves
    /// left by this amount every frame.
    pub speed: i32,
    /// Side of the moving (or parked) object.
    pub object_size: usize,
    /// Per-frame velocity of the moving box.
    pub object_velocity: (i32, i32),
    /// Frames `0..parked_frames` contain the parked object (ghost scene).
    pub parked_frames: usize,
    pub object_color: [u8; 3],
}

impl SceneSpec {
    pub fn new(kind: SceneKind) -> Self {
        Self {
            kind,
            width: 320,
            height: 240,
            length: match kind {
                SceneKind::StaticGhost => 100,
                _ => 250,
            },
            seed: 7,
            speed: 1,
            object_size: match kind {
                SceneKind::StaticGhost => 40,
                _ => 20,
            },
            object_velocity: (3, 2),
            parked_frames: 80,
            object_color: [220, 210, 40],
        }
    }
}

/// A generated scene: frames, exact foreground masks and per-frame clean
/// background plates.
#[derive(Clone, Debug)]
pub struct Scene {
    pub spec: SceneSpec,
    pub frames: Vec<Frame>,
    pub ground_truth: Vec<MaskFrame>,
    pub plates: Vec<Frame>,
}

/// Position of a box bouncing inside `[0, limit]` with constant speed.
fn bounce(start: i64, velocity: i64, t: i64, limit: i64) -> i64 {
    if limit <= 0 {
        return 0;
    }
    let period = 2 * limit;
    let p = (start + velocity * t).rem_euclid(period);
    if p <= limit {
        p
    } else {
        period - p
    }
}

pub fn generate(spec: &SceneSpec) -> Scene {
    let tex = Texture::background(spec.seed);
    let (w, h) = (spec.width, spec.height);
    let size = spec.object_size.min(w).min(h);
    let mut frames = Vec::with_capacity(spec.length);
    let mut gts = Vec::with_capacity(spec.length);
    let mut plates = Vec::with_capacity(spec.length);
    for t in 0..spec.length {
        let shift = match spec.kind {
            SceneKind::Pan => spec.speed as f32 * t as f32,
            _ => 0.0,
        };
        let plate = tex.render(w, h, 3, shift, 0.0);
        let object = match spec.kind {
            SceneKind::Static | SceneKind::Pan => {
                let x = bounce(
                    w as i64 / 5,
                    spec.object_velocity.0 as i64,
                    t as i64,
                    (w - size) as i64,
                );
                let y = bounce(
                    h as i64 / 3,
                    spec.object_velocity.1 as i64,
                    t as i64,
                    (h - size) as i64,
                );
                Some((x as usize, y as usize))
            }
            SceneKind::StaticGhost => {
                (t < spec.parked_frames).then_some(((w - size) / 2, (h - size) / 2))
            }
        };
        let inside = |x: usize, y: usize| match object {
            Some((ox, oy)) => x >= ox && x < ox + size && y >= oy && y < oy + size,
            None => false,
        };
        let frame = Frame::from_fn(w, h, 3, |x, y, c| {
            if inside(x, y) {
                spec.object_color[c]
            } else {
                plate.get(x, y, c)
            }
        });
        gts.push(MaskFrame::from_fn(w, h, inside));
        frames.push(frame);
        plates.push(plate);
    }
    Scene {
        spec: spec.clone(),
        frames,
        ground_truth: gts,
        plates,
    }
}

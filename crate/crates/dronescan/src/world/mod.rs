//! 2D environment model: garage, boxes, plates, and all geometric queries.
//!
//! A `World` is immutable after construction; every query is a pure function,
//! so worlds can be shared across threads freely.

mod scenario;

pub use scenario::{load_scenario, ScenarioError};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use thiserror::Error;

/// Default box footprint (meters); the paper never states dimensions.
pub const DEFAULT_BOX_WIDTH: f64 = 0.45;
pub const DEFAULT_BOX_DEPTH: f64 = 0.35;
/// EU standard plate: 520 x 110 mm. Height kept only for reporting.
pub const PLATE_WIDTH: f64 = 0.52;
pub const PLATE_HEIGHT: f64 = 0.11;
/// Gap between boxes in a row (meters).
pub const ROW_GAP: f64 = 0.25;
/// Default lateral jitter amplitude for the "not in a straight line" cases.
pub const DEFAULT_JITTER_AMPLITUDE: f64 = 0.10;

const GARAGE_WIDTH: f64 = 6.0;
const GARAGE_HEIGHT: f64 = 3.6;
const START_OFFSET_TO_ROW: f64 = 2.0;
const ROW_SEPARATION: f64 = 1.37;

/// 2D vector in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// 2D cross product (z component).
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// Normalize an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r -= std::f64::consts::TAU;
    }
    r
}

/// Position plus heading; yaw normalized to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec2,
    pub yaw: f64,
}

impl Pose {
    pub fn new(position: Vec2, yaw: f64) -> Self {
        Pose {
            position,
            yaw: normalize_angle(yaw),
        }
    }

    /// Unit vector along the heading.
    pub fn heading(self) -> Vec2 {
        Vec2::new(self.yaw.cos(), self.yaw.sin())
    }
}

/// Line segment; endpoints must differ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

/// Which box face carries the plate, in the box's local frame before rotation
/// (North = +y face).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateFace {
    North,
    South,
    East,
    West,
}

impl PlateFace {
    pub fn letter(self) -> char {
        match self {
            PlateFace::North => 'N',
            PlateFace::South => 'S',
            PlateFace::East => 'E',
            PlateFace::West => 'W',
        }
    }

    fn local_normal(self) -> Vec2 {
        match self {
            PlateFace::North => Vec2::new(0.0, 1.0),
            PlateFace::South => Vec2::new(0.0, -1.0),
            PlateFace::East => Vec2::new(1.0, 0.0),
            PlateFace::West => Vec2::new(-1.0, 0.0),
        }
    }
}

/// Rectangular obstacle; `width` spans local x, `depth` local y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxObstacle {
    pub center: Vec2,
    pub width: f64,
    pub depth: f64,
    pub yaw: f64,
    pub plate_face: Option<PlateFace>,
}

impl BoxObstacle {
    /// Corners in CCW order starting at local (-w/2, -d/2).
    pub fn corners(&self) -> [Vec2; 4] {
        let hw = self.width / 2.0;
        let hd = self.depth / 2.0;
        let local = [
            Vec2::new(-hw, -hd),
            Vec2::new(hw, -hd),
            Vec2::new(hw, hd),
            Vec2::new(-hw, hd),
        ];
        local.map(|p| self.center + p.rotated(self.yaw))
    }

    /// Face segments in fixed order: South, East, North, West (local frame).
    pub fn faces(&self) -> [Segment; 4] {
        let c = self.corners();
        [
            Segment { a: c[0], b: c[1] },
            Segment { a: c[1], b: c[2] },
            Segment { a: c[2], b: c[3] },
            Segment { a: c[3], b: c[0] },
        ]
    }

    fn face_segment(&self, face: PlateFace) -> Segment {
        let f = self.faces();
        match face {
            PlateFace::South => f[0],
            PlateFace::East => f[1],
            PlateFace::North => f[2],
            PlateFace::West => f[3],
        }
    }

    /// True if `p` lies strictly inside the box (boundary excluded).
    pub fn contains(&self, p: Vec2) -> bool {
        let local = (p - self.center).rotated(-self.yaw);
        local.x.abs() < self.width / 2.0 && local.y.abs() < self.depth / 2.0
    }
}

/// A license plate mounted on a box face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateTarget {
    pub id: u32,
    pub center: Vec2,
    pub outward_normal: Vec2,
    pub width: f64,
    pub height: f64,
}

/// One plate sighted by the camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateSighting {
    pub plate_id: u32,
    pub distance: f64,
    pub incidence: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("garage dimensions must be positive, got {0} x {1}")]
    BadGarage(f64, f64),
    #[error("box {index} extends outside the garage")]
    BoxOutsideGarage { index: usize },
    #[error("box {index} has non-positive width or depth")]
    BadBoxSize { index: usize },
    #[error("start pose is outside the garage")]
    StartOutsideGarage,
    #[error("start pose is inside box {index}")]
    StartInsideBox { index: usize },
}

/// Immutable 2D environment: axis-aligned garage, boxes, plates, start pose.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub garage_width: f64,
    pub garage_height: f64,
    pub start_pose: Pose,
    boxes: Vec<BoxObstacle>,
    plates: Vec<PlateTarget>,
    segments: Vec<Segment>,
}

/// Raw raycast hit before millimeter quantization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub segment_index: usize,
}

impl World {
    pub fn new(
        garage_width: f64,
        garage_height: f64,
        start_pose: Pose,
        boxes: Vec<BoxObstacle>,
    ) -> Result<World, WorldError> {
        if !(garage_width > 0.0 && garage_height > 0.0)
            || !garage_width.is_finite()
            || !garage_height.is_finite()
        {
            return Err(WorldError::BadGarage(garage_width, garage_height));
        }
        let inside = |p: Vec2| {
            p.x >= 0.0 && p.x <= garage_width && p.y >= 0.0 && p.y <= garage_height
        };
        for (index, b) in boxes.iter().enumerate() {
            if !(b.width > 0.0 && b.depth > 0.0) {
                return Err(WorldError::BadBoxSize { index });
            }
            if !b.corners().iter().all(|&c| inside(c)) {
                return Err(WorldError::BoxOutsideGarage { index });
            }
        }
        if !inside(start_pose.position) {
            return Err(WorldError::StartOutsideGarage);
        }
        for (index, b) in boxes.iter().enumerate() {
            if b.contains(start_pose.position) {
                return Err(WorldError::StartInsideBox { index });
            }
        }

        // Segment order is part of the raycast tie-break contract:
        // garage boundary S, E, N, W first, then each box's faces in order.
        let w = garage_width;
        let h = garage_height;
        let mut segments = vec![
            Segment { a: Vec2::new(0.0, 0.0), b: Vec2::new(w, 0.0) },
            Segment { a: Vec2::new(w, 0.0), b: Vec2::new(w, h) },
            Segment { a: Vec2::new(w, h), b: Vec2::new(0.0, h) },
            Segment { a: Vec2::new(0.0, h), b: Vec2::new(0.0, 0.0) },
        ];
        let mut plates = Vec::new();
        for b in &boxes {
            segments.extend_from_slice(&b.faces());
            if let Some(face) = b.plate_face {
                let seg = b.face_segment(face);
                plates.push(PlateTarget {
                    id: plates.len() as u32,
                    center: (seg.a + seg.b) * 0.5,
                    outward_normal: face.local_normal().rotated(b.yaw),
                    width: PLATE_WIDTH,
                    height: PLATE_HEIGHT,
                });
            }
        }

        Ok(World {
            garage_width,
            garage_height,
            start_pose,
            boxes,
            plates,
            segments,
        })
    }

    pub fn boxes(&self) -> &[BoxObstacle] {
        &self.boxes
    }

    pub fn plates(&self) -> &[PlateTarget] {
        &self.plates
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// True if `p` is inside the garage and outside every box.
    pub fn is_free(&self, p: Vec2) -> bool {
        p.x >= 0.0
            && p.x <= self.garage_width
            && p.y >= 0.0
            && p.y <= self.garage_height
            && !self.boxes.iter().any(|b| b.contains(p))
    }

    /// Nearest surface along the ray, unquantized, with the hit segment.
    ///
    /// Ties at shared endpoints resolve to the lowest segment index: the scan
    /// replaces the best hit only on a strictly smaller distance.
    pub fn ray_cast_hit(&self, origin: Vec2, direction: Vec2, max_range: f64) -> Option<RayHit> {
        debug_assert!((direction.norm() - 1.0).abs() < 1e-9, "direction must be unit");
        debug_assert!(max_range > 0.0);
        let mut best: Option<RayHit> = None;
        for (segment_index, seg) in self.segments.iter().enumerate() {
            let e = seg.b - seg.a;
            let denom = direction.cross(e);
            if denom.abs() < 1e-15 {
                continue; // parallel; grazing handled by adjoining segments
            }
            let to_a = seg.a - origin;
            let t = to_a.cross(e) / denom;
            let s = to_a.cross(direction) / denom;
            if t > 1e-12 && (0.0..=1.0).contains(&s) && t <= max_range {
                if best.map_or(true, |b| t < b.distance) {
                    best = Some(RayHit { distance: t, segment_index });
                }
            }
        }
        best
    }

    /// Distance to the nearest surface, quantized to millimeters, or `None`
    /// when nothing lies within `max_range`.
    pub fn ray_cast(&self, origin: Vec2, direction: Vec2, max_range: f64) -> Option<f64> {
        self.ray_cast_hit(origin, direction, max_range)
            .map(|h| quantize_mm(h.distance))
    }

    /// Plates visible from `camera_pose`: inside the field of view, within
    /// `max_dist`, viewed at incidence <= `max_incidence`, and unoccluded.
    pub fn plate_visibility(
        &self,
        camera_pose: Pose,
        fov: f64,
        max_dist: f64,
        max_incidence: f64,
    ) -> Vec<PlateSighting> {
        debug_assert!(fov > 0.0 && fov < std::f64::consts::PI);
        let axis = camera_pose.heading();
        let mut out = Vec::new();
        for plate in &self.plates {
            let to_plate = plate.center - camera_pose.position;
            let distance = to_plate.norm();
            if distance < 1e-9 || distance > max_dist {
                continue;
            }
            let dir = to_plate * (1.0 / distance);
            let bearing = dir.dot(axis).clamp(-1.0, 1.0).acos();
            if bearing > fov / 2.0 {
                continue;
            }
            let incidence = (dir * -1.0)
                .dot(plate.outward_normal)
                .clamp(-1.0, 1.0)
                .acos();
            if incidence > max_incidence {
                continue;
            }
            // Occluded if some other surface sits in front of the plate's own
            // face (which the ray hits at ~`distance`).
            if let Some(hit) = self.ray_cast_hit(camera_pose.position, dir, distance + 1.0) {
                if hit.distance < distance - 1e-6 {
                    continue;
                }
            }
            out.push(PlateSighting { plate_id: plate.id, distance, incidence });
        }
        out
    }

    /// Canonical scenario-file form; identical worlds serialize identically.
    pub fn to_scenario_string(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(s, "garage {:.6} {:.6}", self.garage_width, self.garage_height);
        let _ = writeln!(
            s,
            "start {:.6} {:.6} {:.6}",
            self.start_pose.position.x,
            self.start_pose.position.y,
            self.start_pose.yaw.to_degrees()
        );
        for b in &self.boxes {
            let face = b.plate_face.map_or('-', PlateFace::letter);
            let _ = writeln!(
                s,
                "box {:.6} {:.6} {:.6} {:.6} {:.6} {}",
                b.center.x,
                b.center.y,
                b.width,
                b.depth,
                b.yaw.to_degrees(),
                face
            );
        }
        s
    }
}

fn quantize_mm(d: f64) -> f64 {
    (d * 1000.0).round() / 1000.0
}

/// Extended knobs for the canned test cases.
#[derive(Debug, Clone, Copy)]
pub struct TestCaseParams {
    pub box_width: f64,
    pub box_depth: f64,
    pub jitter_seed: u64,
    pub jitter_amplitude: f64,
}

impl Default for TestCaseParams {
    fn default() -> Self {
        TestCaseParams {
            box_width: DEFAULT_BOX_WIDTH,
            box_depth: DEFAULT_BOX_DEPTH,
            jitter_seed: 0,
            jitter_amplitude: DEFAULT_JITTER_AMPLITUDE,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TestCaseError {
    #[error("test case id must be 1..=4, got {0}")]
    BadCaseId(u8),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Build one of the four canned garage setups.
///
/// Case 1: one free-standing row of 4 boxes parallel to the long wall,
/// 25 cm gaps, front face 2.0 m from the start; the drone loops the row.
/// Case 2: case 1 with seeded per-box lateral jitter.
/// Case 3: two rows of 3 boxes each, perpendicular to the long wall and
/// attached to the north wall, front faces 1.37 m apart; the drone
/// serpentines through the slot between the rows.
/// Case 4: case 3 with jitter.
pub fn build_test_case(
    case_id: u8,
    box_width: f64,
    box_depth: f64,
    jitter_seed: u64,
) -> Result<World, TestCaseError> {
    build_test_case_with(
        case_id,
        TestCaseParams {
            box_width,
            box_depth,
            jitter_seed,
            ..TestCaseParams::default()
        },
    )
}

pub fn build_test_case_with(case_id: u8, params: TestCaseParams) -> Result<World, TestCaseError> {
    if !(1..=4).contains(&case_id) {
        return Err(TestCaseError::BadCaseId(case_id));
    }
    let jittered = case_id == 2 || case_id == 4;
    let two_rows = case_id == 3 || case_id == 4;
    let w = params.box_width;
    let d = params.box_depth;
    let pitch = w + ROW_GAP;
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(params.jitter_seed);
    let mut offset = |boxes: &mut Vec<BoxObstacle>, along: Vec2| {
        // Perpendicular jitter drawn in box order so the sequence is stable.
        for b in boxes.iter_mut() {
            let u: f64 = jitter_rng.gen();
            let shift = if jittered {
                (2.0 * u - 1.0) * params.jitter_amplitude
            } else {
                0.0
            };
            b.center = b.center + along * shift;
        }
    };

    let (start, mut boxes) = if !two_rows {
        // Row of 4 along x, centered; plates face the start (south).
        let n = 4;
        let row_center_x = GARAGE_WIDTH / 2.0;
        // Start low so the loop around the row clears the north wall.
        let start = Pose::new(
            Vec2::new(row_center_x + pitch / 2.0, 0.1),
            std::f64::consts::FRAC_PI_2,
        );
        let front_y = start.position.y + START_OFFSET_TO_ROW;
        let boxes: Vec<BoxObstacle> = (0..n)
            .map(|i| BoxObstacle {
                center: Vec2::new(
                    row_center_x + pitch * (i as f64 - (n - 1) as f64 / 2.0),
                    front_y + d / 2.0,
                ),
                width: w,
                depth: d,
                yaw: 0.0,
                plate_face: Some(PlateFace::South),
            })
            .collect();
        (start, boxes)
    } else {
        // Two rows of 3 along y, anchored one gap width below the north wall
        // so the wall reads like another row element; plates face the start
        // (west). Boxes are rotated by pi/2, so the local North face is the
        // world-west face and local y spans world x.
        let n = 3;
        let yaw = std::f64::consts::FRAC_PI_2;
        let centers_y: Vec<f64> = (0..n)
            .map(|i| GARAGE_HEIGHT - ROW_GAP - w / 2.0 - pitch * i as f64)
            .collect();
        let start = Pose::new(Vec2::new(0.3, centers_y[1]), 0.0);
        let row1_front_x = start.position.x + START_OFFSET_TO_ROW;
        let row2_front_x = row1_front_x + ROW_SEPARATION;
        let mut boxes = Vec::new();
        for &front_x in &[row1_front_x, row2_front_x] {
            for &cy in &centers_y {
                boxes.push(BoxObstacle {
                    center: Vec2::new(front_x + d / 2.0, cy),
                    width: w,
                    depth: d,
                    yaw,
                    plate_face: Some(PlateFace::North),
                });
            }
        }
        (start, boxes)
    };

    let along = if two_rows {
        Vec2::new(1.0, 0.0)
    } else {
        Vec2::new(0.0, 1.0)
    };
    offset(&mut boxes, along);

    Ok(World::new(GARAGE_WIDTH, GARAGE_HEIGHT, start, boxes)?)
}

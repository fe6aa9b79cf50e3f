//! Intersection layout, movement paths, conflict points and the cell grid
//! laid over the coordination zone.
//!
//! World frame: the coordination zone is the square `[0, S] x [0, S]`, `x`
//! pointing east and `y` north. Headings are measured clockwise from north,
//! so a heading `h` moves along `(sin h, cos h)`. Traffic keeps right; each
//! approach has three turn-dedicated lanes ordered left, straight, right
//! outwards from the median.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Overlap (in meters) below which two shapes are treated as only touching.
const AREA_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        math::hypot(self.x - other.x, self.y - other.y)
    }

    fn offset(self, dir: Point, len: f64) -> Point {
        Point::new(self.x + dir.x * len, self.y + dir.y * len)
    }
}

/// Unit direction of a heading measured clockwise from north.
pub fn heading_dir(heading: f64) -> Point {
    Point::new(math::sin(heading), math::cos(heading))
}

fn dir_heading(dir: Point) -> f64 {
    math::atan2(dir.x, dir.y)
}

/// Side of the intersection a vehicle arrives from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Approach {
    North,
    South,
    East,
    West,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::North, Approach::South, Approach::East, Approach::West];

    /// Clockwise quarter turns that map the south approach onto this one.
    fn quarter_turns(self) -> u8 {
        match self {
            Approach::South => 0,
            Approach::West => 1,
            Approach::North => 2,
            Approach::East => 3,
        }
    }

    fn index(self) -> usize {
        match self {
            Approach::North => 0,
            Approach::South => 1,
            Approach::East => 2,
            Approach::West => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Approach::North => "North",
            Approach::South => "South",
            Approach::East => "East",
            Approach::West => "West",
        }
    }

    /// Side reached after taking `turn` from this approach.
    pub fn destination(self, turn: Turn) -> Approach {
        use Approach::*;
        match (self, turn) {
            (North, Turn::Straight) => South,
            (North, Turn::Left) => East,
            (North, Turn::Right) => West,
            (South, Turn::Straight) => North,
            (South, Turn::Left) => West,
            (South, Turn::Right) => East,
            (East, Turn::Straight) => West,
            (East, Turn::Left) => South,
            (East, Turn::Right) => North,
            (West, Turn::Straight) => East,
            (West, Turn::Left) => North,
            (West, Turn::Right) => South,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Turn {
    Left,
    Straight,
    Right,
}

impl Turn {
    pub const ALL: [Turn; 3] = [Turn::Left, Turn::Straight, Turn::Right];

    fn index(self) -> usize {
        match self {
            Turn::Left => 0,
            Turn::Straight => 1,
            Turn::Right => 2,
        }
    }
}

/// Index of one of the twelve movements (equivalently, of its dedicated
/// incoming lane).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MovementId(pub u8);

impl MovementId {
    pub const COUNT: usize = 12;

    pub fn new(origin: Approach, turn: Turn) -> Self {
        MovementId((origin.index() * 3 + turn.index()) as u8)
    }

    pub fn origin(self) -> Approach {
        Approach::ALL[self.0 as usize / 3]
    }

    pub fn turn(self) -> Turn {
        Turn::ALL[self.0 as usize % 3]
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = MovementId> {
        (0..Self::COUNT as u8).map(MovementId)
    }
}

impl core::fmt::Display for MovementId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}-{}", self.origin().name(), self.origin().destination(self.turn()).name())
    }
}

/// Centre-line of a movement through the coordination zone, parameterized
/// by arc length. Positions before `0` and after `length()` extend the
/// path along its entry and exit headings, which is how vehicles upstream
/// of the stop line and past the exit are placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Path {
    Line {
        start: Point,
        heading: f64,
        length: f64,
    },
    Arc {
        center: Point,
        radius: f64,
        /// Polar angle of the start point around `center`.
        start_angle: f64,
        /// `+1` counter-clockwise (left turn), `-1` clockwise (right turn).
        sense: f64,
    },
}

/// Position and heading on a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPose {
    pub point: Point,
    pub heading: f64,
}

impl Path {
    pub fn length(&self) -> f64 {
        match *self {
            Path::Line { length, .. } => length,
            Path::Arc { radius, .. } => radius * FRAC_PI_2,
        }
    }

    fn start_pose(&self) -> PathPose {
        self.pose_inside(0.0)
    }

    fn end_pose(&self) -> PathPose {
        self.pose_inside(self.length())
    }

    fn pose_inside(&self, s: f64) -> PathPose {
        match *self {
            Path::Line { start, heading, .. } => PathPose {
                point: start.offset(heading_dir(heading), s),
                heading,
            },
            Path::Arc { center, radius, start_angle, sense } => {
                let phi = start_angle + sense * s / radius;
                let point = Point::new(center.x + radius * math::cos(phi), center.y + radius * math::sin(phi));
                let tangent = Point::new(-sense * math::sin(phi), sense * math::cos(phi));
                PathPose { point, heading: dir_heading(tangent) }
            }
        }
    }

    /// Pose at arc length `s`, extended linearly beyond both ends.
    pub fn pose_at(&self, s: f64) -> PathPose {
        let len = self.length();
        if s < 0.0 {
            let p = self.start_pose();
            PathPose { point: p.point.offset(heading_dir(p.heading), s), heading: p.heading }
        } else if s > len {
            let p = self.end_pose();
            PathPose { point: p.point.offset(heading_dir(p.heading), s - len), heading: p.heading }
        } else {
            self.pose_inside(s)
        }
    }

    /// Closest point of the finite path to `q`, as `(distance, arc length)`.
    pub fn closest(&self, q: Point) -> (f64, f64) {
        match *self {
            Path::Line { start, heading, length } => {
                let d = heading_dir(heading);
                let t = ((q.x - start.x) * d.x + (q.y - start.y) * d.y).clamp(0.0, length);
                (q.dist(start.offset(d, t)), t)
            }
            Path::Arc { center, radius, start_angle, sense } => {
                let phi = math::atan2(q.y - center.y, q.x - center.x);
                // Signed sweep from the start angle in the path's sense, in (-pi, pi].
                let mut sweep = sense * (phi - start_angle);
                while sweep > PI {
                    sweep -= 2.0 * PI;
                }
                while sweep <= -PI {
                    sweep += 2.0 * PI;
                }
                let s = (sweep * radius).clamp(0.0, self.length());
                (q.dist(self.pose_inside(s).point), s)
            }
        }
    }
}

/// Geometric parameters of the intersection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionLayout {
    pub lane_width: f64,
    /// Side of the square coordination zone.
    pub zone_side: f64,
    /// Length of each formation zone upstream of its stop line.
    pub formation_length: f64,
    pub speed_limit: f64,
}

impl Default for IntersectionLayout {
    fn default() -> Self {
        Self { lane_width: 2.5, zone_side: 15.0, formation_length: 200.0, speed_limit: 20.0 }
    }
}

/// A movement: origin, turn and its path through the zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Movement {
    pub id: MovementId,
    pub origin: Approach,
    pub turn: Turn,
    pub path: Path,
}

impl IntersectionLayout {
    pub fn validate(&self) -> Result<()> {
        if !(self.lane_width > 0.0 && self.zone_side > 0.0 && self.formation_length > 0.0 && self.speed_limit > 0.0) {
            return Err(Error::Config("layout dimensions must be positive".into()));
        }
        // Three lanes each way must fit into the zone: S >= 6 lanes.
        if self.zone_side + 1e-9 < 6.0 * self.lane_width {
            return Err(Error::Config("coordination zone narrower than six lanes".into()));
        }
        Ok(())
    }

    /// True when the zone is exactly two three-lane roads wide.
    pub fn zone_matches_lanes(&self) -> bool {
        (self.zone_side - 6.0 * self.lane_width).abs() < 1e-9
    }

    fn rotate_cw(&self, p: Point, quarter_turns: u8) -> Point {
        let c = self.zone_side / 2.0;
        let mut q = p;
        for _ in 0..quarter_turns {
            q = Point::new(c + (q.y - c), c - (q.x - c));
        }
        q
    }

    /// Distance of a lane centre from the median.
    fn lane_offset(&self, turn: Turn) -> f64 {
        match turn {
            Turn::Left => 0.5 * self.lane_width,
            Turn::Straight => 1.5 * self.lane_width,
            Turn::Right => 2.5 * self.lane_width,
        }
    }

    pub fn movement(&self, id: MovementId) -> Movement {
        let (origin, turn) = (id.origin(), id.turn());
        let k = origin.quarter_turns();
        let half = self.zone_side / 2.0;
        // Entry on the south edge for the canonical orientation, then rotate.
        let entry = self.rotate_cw(Point::new(half + self.lane_offset(turn), 0.0), k);
        let heading = k as f64 * FRAC_PI_2;
        let dir = heading_dir(heading);
        let path = match turn {
            Turn::Straight => Path::Line { start: entry, heading, length: self.zone_side },
            Turn::Left | Turn::Right => {
                let (radius, normal, sense) = if turn == Turn::Left {
                    (half + self.lane_offset(Turn::Left), Point::new(-dir.y, dir.x), 1.0)
                } else {
                    (half - self.lane_offset(Turn::Right), Point::new(dir.y, -dir.x), -1.0)
                };
                let center = entry.offset(normal, radius);
                let start_angle = math::atan2(entry.y - center.y, entry.x - center.x);
                Path::Arc { center, radius, start_angle, sense }
            }
        };
        Movement { id, origin, turn, path }
    }

    pub fn movements(&self) -> Vec<Movement> {
        MovementId::all().map(|id| self.movement(id)).collect()
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.x <= self.zone_side && p.y >= 0.0 && p.y <= self.zone_side
    }
}

/// A point where two movement paths cross.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictPoint {
    pub movement_a: MovementId,
    pub movement_b: MovementId,
    pub location: Point,
    /// Arc length of the point along each path.
    pub arc_a: f64,
    pub arc_b: f64,
}

/// Marching resolution for path intersection.
pub const CONFLICT_STEP: f64 = 0.01;
/// Paths closer than this count as intersecting (half a vehicle width).
pub const CONFLICT_TOLERANCE: f64 = 0.9;

/// All crossings of two movement paths.
///
/// Path `a` is marched at 1 cm; each maximal run of samples closer than
/// [`CONFLICT_TOLERANCE`] to path `b` contributes one conflict point at the
/// closest approach. The result does not depend on argument order.
pub fn conflict_points(a: &Movement, b: &Movement) -> Vec<ConflictPoint> {
    if a.id == b.id {
        return Vec::new();
    }
    let (first, second, swapped) = if a.id < b.id { (a, b, false) } else { (b, a, true) };
    let len = first.path.length();
    let steps = math::ceil(len / CONFLICT_STEP) as usize;
    let mut out = Vec::new();
    let mut best: Option<(f64, f64, f64)> = None; // (distance, arc on first, arc on second)
    for i in 0..=steps {
        let s = (i as f64 * CONFLICT_STEP).min(len);
        let p = first.path.pose_at(s).point;
        let (d, t) = second.path.closest(p);
        if d < CONFLICT_TOLERANCE {
            match best {
                Some((bd, _, _)) if bd <= d => {}
                _ => best = Some((d, s, t)),
            }
        } else if let Some((_, s_best, t_best)) = best.take() {
            out.push(make_cp(first, second, s_best, t_best));
        }
    }
    if let Some((_, s_best, t_best)) = best {
        out.push(make_cp(first, second, s_best, t_best));
    }
    if swapped {
        for cp in &mut out {
            core::mem::swap(&mut cp.movement_a, &mut cp.movement_b);
            core::mem::swap(&mut cp.arc_a, &mut cp.arc_b);
        }
    }
    out
}

fn make_cp(first: &Movement, second: &Movement, s: f64, t: f64) -> ConflictPoint {
    let p = first.path.pose_at(s).point;
    let q = second.path.pose_at(t).point;
    ConflictPoint {
        movement_a: first.id,
        movement_b: second.id,
        location: Point::new((p.x + q.x) / 2.0, (p.y + q.y) / 2.0),
        arc_a: s,
        arc_b: t,
    }
}

/// 12x12 table of conflict-point counts between movements.
pub fn conflict_matrix(layout: &IntersectionLayout) -> [[usize; MovementId::COUNT]; MovementId::COUNT] {
    let movements = layout.movements();
    let mut m = [[0; MovementId::COUNT]; MovementId::COUNT];
    for a in &movements {
        for b in &movements {
            if a.id < b.id {
                let n = conflict_points(a, b).len();
                m[a.id.index()][b.id.index()] = n;
                m[b.id.index()][a.id.index()] = n;
            }
        }
    }
    m
}

/// Minimum stopping distance at full deceleration: `v^2 / (2 a)`.
pub fn msd(speed: f64, decel_max: f64) -> Result<f64> {
    if !(speed >= 0.0) {
        return Err(Error::Domain(alloc::format!("negative speed {speed}")));
    }
    if !(decel_max > 0.0) {
        return Err(Error::Domain(alloc::format!("non-positive deceleration {decel_max}")));
    }
    Ok(speed * speed / (2.0 * decel_max))
}

/// Minimum coordination distance of a conflicting pair.
pub fn mcd(d1: f64, d2: f64) -> f64 {
    d1.min(d2)
}

/// Oriented rectangle: a vehicle body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: Point,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl Rect {
    pub fn corners(&self) -> [Point; 4] {
        let u = heading_dir(self.heading);
        let n = Point::new(u.y, -u.x);
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        let c = self.center;
        [
            Point::new(c.x + u.x * hl + n.x * hw, c.y + u.y * hl + n.y * hw),
            Point::new(c.x + u.x * hl - n.x * hw, c.y + u.y * hl - n.y * hw),
            Point::new(c.x - u.x * hl - n.x * hw, c.y - u.y * hl - n.y * hw),
            Point::new(c.x - u.x * hl + n.x * hw, c.y - u.y * hl + n.y * hw),
        ]
    }

    fn inflated(&self, margin: f64) -> Rect {
        Rect { length: self.length + 2.0 * margin, width: self.width + 2.0 * margin, ..*self }
    }

    /// Whether `p` lies inside (boundary included).
    pub fn contains(&self, p: Point) -> bool {
        let u = heading_dir(self.heading);
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        let along = dx * u.x + dy * u.y;
        let across = dx * u.y - dy * u.x;
        along.abs() <= self.length / 2.0 && across.abs() <= self.width / 2.0
    }
}

/// A grid cell, rows counted from the top (north) edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: u16,
    pub col: u16,
}

impl Cell {
    pub const fn new(row: u16, col: u16) -> Self {
        Self { row, col }
    }
}

/// Axis-aligned square grid anchored at its north-west corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub left: f64,
    pub top: f64,
    pub cell_size: f64,
    pub rows: usize,
    pub cols: usize,
}

impl Grid {
    /// `g x g` decomposition of the coordination zone.
    pub fn zone(zone_side: f64, granularity: usize) -> Result<Self> {
        if granularity == 0 {
            return Err(Error::Config("granularity must be positive".into()));
        }
        Ok(Self {
            left: 0.0,
            top: zone_side,
            cell_size: zone_side / granularity as f64,
            rows: granularity,
            cols: granularity,
        })
    }

    pub fn granularity(&self) -> usize {
        self.rows
    }

    /// `(x0, y0, x1, y1)` bounds of a cell.
    pub fn cell_bounds(&self, cell: Cell) -> (f64, f64, f64, f64) {
        let x0 = self.left + cell.col as f64 * self.cell_size;
        let y1 = self.top - cell.row as f64 * self.cell_size;
        (x0, y1 - self.cell_size, x0 + self.cell_size, y1)
    }

    pub fn cell_of(&self, p: Point) -> Option<Cell> {
        let c = math::floor((p.x - self.left) / self.cell_size);
        let r = math::floor((self.top - p.y) / self.cell_size);
        if c < 0.0 || r < 0.0 || c >= self.cols as f64 || r >= self.rows as f64 {
            return None;
        }
        Some(Cell::new(r as u16, c as u16))
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row as usize * self.cols + cell.col as usize
    }
}

fn project(points: &[Point], axis: Point) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in points {
        let v = p.x * axis.x + p.y * axis.y;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Positive-area overlap between a rectangle and a grid cell (separating
/// axis test with strict inequalities).
fn rect_overlaps_cell(corners: &[Point; 4], rect_axes: &[Point; 2], bounds: (f64, f64, f64, f64)) -> bool {
    let (x0, y0, x1, y1) = bounds;
    let cell = [Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)];
    let axes = [Point::new(1.0, 0.0), Point::new(0.0, 1.0), rect_axes[0], rect_axes[1]];
    axes.iter().all(|&axis| {
        let (a0, a1) = project(corners, axis);
        let (b0, b1) = project(&cell, axis);
        a1.min(b1) - a0.max(b0) > AREA_EPS
    })
}

/// Cells of `grid` whose area meets any rectangle of `footprint` with
/// positive measure. Sorted and deduplicated.
pub fn occupied_cells(footprint: &[Rect], grid: &Grid) -> Vec<Cell> {
    let mut out = Vec::new();
    for rect in footprint {
        rasterize_into(rect, grid, &mut out);
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn rasterize_into(rect: &Rect, grid: &Grid, out: &mut Vec<Cell>) {
    let corners = rect.corners();
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for c in &corners {
        xmin = xmin.min(c.x);
        xmax = xmax.max(c.x);
        ymin = ymin.min(c.y);
        ymax = ymax.max(c.y);
    }
    let cs = grid.cell_size;
    let c0 = math::floor((xmin - grid.left) / cs).max(0.0);
    let c1 = math::floor((xmax - grid.left) / cs).min(grid.cols as f64 - 1.0);
    let r0 = math::floor((grid.top - ymax) / cs).max(0.0);
    let r1 = math::floor((grid.top - ymin) / cs).min(grid.rows as f64 - 1.0);
    if c0 > c1 || r0 > r1 {
        return;
    }
    let u = heading_dir(rect.heading);
    let axes = [u, Point::new(u.y, -u.x)];
    for r in r0 as usize..=r1 as usize {
        for c in c0 as usize..=c1 as usize {
            let cell = Cell::new(r as u16, c as u16);
            if rect_overlaps_cell(&corners, &axes, grid.cell_bounds(cell)) {
                out.push(cell);
            }
        }
    }
}

/// Body rectangle of a vehicle whose front bumper sits at arc length
/// `front` on `path`.
pub fn body_rect(path: &Path, front: f64, length: f64, width: f64) -> Rect {
    let pose = path.pose_at(front - length / 2.0);
    Rect { center: pose.point, heading: pose.heading, length, width }
}

/// Per-movement cell occupancy tables for one zone grid.
///
/// For every movement, the cells touched by a single vehicle body are
/// tabulated against front-bumper position at [`CONFLICT_STEP`]
/// resolution, using a body inflated by one sampling step so that any
/// position between samples is covered. From these the swept cell set of
/// each movement and, for every ordered pair of movements, the interval of
/// front positions during which a body touches the other movement's swept
/// cells are derived.
#[derive(Debug, Clone)]
pub struct OccupancyTables {
    pub grid: Grid,
    /// Front position of the first sample.
    pub start: f64,
    /// Number of samples per movement.
    pub samples: usize,
    /// `cells[m][i]`: cells touched with the front at `start + i * step`.
    cells: Vec<Vec<Vec<Cell>>>,
    swept: Vec<Vec<Cell>>,
    /// `region[a][b] = Some((enter, leave))` front positions on `a` bounding
    /// all contact with the swept cells of `b`.
    region: Vec<Vec<Option<(f64, f64)>>>,
    /// Smallest front-to-front spacing that keeps two bodies on the same
    /// movement in disjoint cells.
    self_spacing: Vec<f64>,
}

impl OccupancyTables {
    pub fn build(layout: &IntersectionLayout, grid: Grid, vehicle_length: f64, vehicle_width: f64) -> Self {
        let movements = layout.movements();
        let step = CONFLICT_STEP;
        let start = -step;
        let mut cells = Vec::with_capacity(movements.len());
        let mut swept = Vec::with_capacity(movements.len());
        let mut samples = 0;
        for m in &movements {
            let end = m.path.length() + vehicle_length + step;
            let n = math::ceil((end - start) / step) as usize + 1;
            samples = samples.max(n);
            let mut per = Vec::with_capacity(n);
            let mut all = Vec::new();
            for i in 0..n {
                let front = start + i as f64 * step;
                let rect = body_rect(&m.path, front, vehicle_length, vehicle_width).inflated(step);
                let cs = occupied_cells(&[rect], &grid);
                all.extend_from_slice(&cs);
                per.push(cs);
            }
            all.sort_unstable();
            all.dedup();
            cells.push(per);
            swept.push(all);
        }
        let mut region = alloc::vec![alloc::vec![None; movements.len()]; movements.len()];
        for a in 0..movements.len() {
            for b in 0..movements.len() {
                if a == b {
                    continue;
                }
                let mut first = None;
                let mut last = None;
                for (i, cs) in cells[a].iter().enumerate() {
                    if cs.iter().any(|c| swept[b].binary_search(c).is_ok()) {
                        if first.is_none() {
                            first = Some(i);
                        }
                        last = Some(i);
                    }
                }
                if let (Some(f), Some(l)) = (first, last) {
                    // One step of slack on each side.
                    let enter = start + (f as f64 - 1.0) * step;
                    let leave = start + (l as f64 + 1.0) * step;
                    region[a][b] = Some((enter, leave));
                }
            }
        }
        let mut self_spacing = Vec::with_capacity(movements.len());
        for per in &cells {
            // Smallest lag (in samples) for which no two samples that far apart share a cell.
            let n = per.len();
            let mut lag = (vehicle_length / step) as usize;
            'search: while lag < n {
                for i in lag..n {
                    if per[i].iter().any(|c| per[i - lag].binary_search(c).is_ok()) {
                        lag += 1;
                        continue 'search;
                    }
                }
                break;
            }
            self_spacing.push((lag as f64 + 1.0) * step);
        }
        Self { grid, start, samples, cells, swept, region, self_spacing }
    }

    /// Cells touched by a body on `m` with its front at `front`
    /// (nearest tabulated sample; empty outside the tabulated range).
    pub fn cells_at(&self, m: MovementId, front: f64) -> &[Cell] {
        let per = &self.cells[m.index()];
        let i = math::floor((front - self.start) / CONFLICT_STEP + 0.5);
        if i < 0.0 || i as usize >= per.len() {
            return &[];
        }
        &per[i as usize]
    }

    pub fn swept(&self, m: MovementId) -> &[Cell] {
        &self.swept[m.index()]
    }

    /// Front-position interval on `a` during which its body may touch cells
    /// `b` sweeps; `None` when the movements never share a cell.
    pub fn region(&self, a: MovementId, b: MovementId) -> Option<(f64, f64)> {
        self.region[a.index()][b.index()]
    }

    pub fn grid_conflict(&self, a: MovementId, b: MovementId) -> bool {
        a != b && self.region(a, b).is_some()
    }

    pub fn self_spacing(&self, m: MovementId) -> f64 {
        self.self_spacing[m.index()]
    }
}

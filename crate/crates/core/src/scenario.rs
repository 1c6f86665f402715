//! Deployment geometry: BS, cellular users, D2D pairs and the two rows of RIS
//! panels, plus the distances the channel models consume.
//!
//! Links are numbered D2D pairs first (`0..D`), then cellular uplinks
//! (`D..D+C`). Receivers are addressed by *slot*: slot `d < D` is the receiver
//! of D2D pair `d`, slot `D` is the BS.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::{SimParams, PANEL_COUNT};

pub const AREA_X: f64 = 100.0;
pub const AREA_Y: f64 = 200.0;
pub const BS_POSITION: Point3 = Point3([50.0, 100.0, 0.0]);
pub const ELEMENT_SPACING: f64 = 0.005;
pub const PANELS_PER_ROW: usize = 4;
const ROW_X: [f64; 2] = [0.0, 50.0];
const FIRST_ANCHOR_Y: f64 = 25.0;
const ANCHOR_STEP_Y: f64 = 50.0;

/// Upper bound on `C + D`.
pub const MAX_USERS: usize = 4096;
const MAX_PLACEMENT_RETRIES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3(pub [f64; 3]);

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self([x, y, z])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.0[0] - other.0[0];
        let dy = self.0[1] - other.0[1];
        let dz = self.0[2] - other.0[2];
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn midpoint(&self, other: &Point3) -> Point3 {
        Point3([
            0.5 * (self.0[0] + other.0[0]),
            0.5 * (self.0[1] + other.0[1]),
            0.5 * (self.0[2] + other.0[2]),
        ])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Bs,
    CellularUser,
    D2dTx,
    D2dRx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub position: Point3,
    pub role: Role,
}

impl Node {
    pub fn new(id: usize, position: Point3, role: Role) -> Self {
        Self { id, position, role }
    }

    pub fn is_bs(&self) -> bool {
        self.role == Role::Bs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D2dPair {
    pub tx: Node,
    pub rx: Node,
}

impl D2dPair {
    pub fn distance(&self) -> f64 {
        self.tx.position.distance(&self.rx.position)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisPanel {
    pub id: usize,
    /// Lower-left corner of the element grid.
    pub anchor: Point3,
    /// 0 for the row at x = 0, 1 for the row at x = 50.
    pub row: usize,
    /// Elements per side.
    pub side: usize,
    pub spacing: f64,
}

impl RisPanel {
    /// Panel `id` of the fixed layout with `side × side` elements.
    pub fn in_layout(id: usize, side: usize) -> Self {
        let row = id / PANELS_PER_ROW;
        let k = id % PANELS_PER_ROW;
        Self {
            id,
            anchor: Point3([ROW_X[row], FIRST_ANCHOR_Y + ANCHOR_STEP_Y * k as f64, 0.0]),
            row,
            side,
            spacing: ELEMENT_SPACING,
        }
    }

    /// Element `(lz, ly)`, 0-based, sits at `anchor + (0, (ly+1)·d, (lz+1)·d)`.
    pub fn element_position(&self, lz: usize, ly: usize) -> Point3 {
        let a = self.anchor.0;
        Point3([
            a[0],
            a[1] + (ly + 1) as f64 * self.spacing,
            a[2] + (lz + 1) as f64 * self.spacing,
        ])
    }

    pub fn element_positions(&self) -> Grid<Point3> {
        Grid::from_fn(self.side, |lz, ly| self.element_position(lz, ly))
    }

    pub fn center(&self) -> Point3 {
        let half = (self.side + 1) as f64 * 0.5 * self.spacing;
        let a = self.anchor.0;
        Point3([a[0], a[1] + half, a[2] + half])
    }
}

/// Per-element `(tx → element, element → rx)` distances.
pub fn reflect_path_lengths(tx: Point3, rx: Point3, panel: &RisPanel) -> Grid<(f64, f64)> {
    Grid::from_fn(panel.side, |lz, ly| {
        let el = panel.element_position(lz, ly);
        (tx.distance(&el), el.distance(&rx))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkKind {
    CellularUplink,
    D2d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: usize,
    pub kind: LinkKind,
    pub tx: usize,
    pub rx: usize,
}

impl Link {
    pub fn is_d2d(&self) -> bool {
        self.kind == LinkKind::D2d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: SimParams,
    pub bs: Node,
    pub cellular_users: Vec<Node>,
    pub d2d_pairs: Vec<D2dPair>,
    pub ris_panels: Vec<RisPanel>,
    pub links: Vec<Link>,
}

fn in_area(p: &Point3) -> bool {
    (0.0..=AREA_X).contains(&p.x()) && (0.0..=AREA_Y).contains(&p.y())
}

fn uniform_in_area<R: Rng>(rng: &mut R) -> Point3 {
    Point3([
        rng.random_range(0.0..=AREA_X),
        rng.random_range(0.0..=AREA_Y),
        0.0,
    ])
}

impl Scenario {
    /// Assembles a scenario from explicit positions (fixtures, replays).
    pub fn from_positions(
        params: SimParams,
        cellular_users: &[Point3],
        d2d_pairs: &[(Point3, Point3)],
    ) -> Result<Self> {
        params.validate()?;
        if d2d_pairs.is_empty() {
            return Err(Error::param("D", "at least one D2D pair is required"));
        }
        let c = cellular_users.len();
        let d = d2d_pairs.len();
        if c + d > MAX_USERS {
            return Err(Error::Placement(format!(
                "C + D = {} exceeds the supported maximum of {MAX_USERS}",
                c + d
            )));
        }
        let bs = Node::new(0, BS_POSITION, Role::Bs);
        let cellular_users: Vec<Node> = cellular_users
            .iter()
            .enumerate()
            .map(|(i, p)| Node::new(1 + i, *p, Role::CellularUser))
            .collect();
        let pairs: Vec<D2dPair> = d2d_pairs
            .iter()
            .enumerate()
            .map(|(i, (t, r))| D2dPair {
                tx: Node::new(1 + c + 2 * i, *t, Role::D2dTx),
                rx: Node::new(2 + c + 2 * i, *r, Role::D2dRx),
            })
            .collect();
        let all_finite = cellular_users.iter().all(|n| n.position.is_finite())
            && pairs
                .iter()
                .all(|p| p.tx.position.is_finite() && p.rx.position.is_finite());
        if !all_finite {
            return Err(Error::DegenerateGeometry("non-finite position".into()));
        }

        let mut links = Vec::with_capacity(d + c);
        for (i, p) in pairs.iter().enumerate() {
            links.push(Link {
                id: i,
                kind: LinkKind::D2d,
                tx: p.tx.id,
                rx: p.rx.id,
            });
        }
        for (k, u) in cellular_users.iter().enumerate() {
            links.push(Link {
                id: d + k,
                kind: LinkKind::CellularUplink,
                tx: u.id,
                rx: bs.id,
            });
        }
        let ris_panels = (0..PANEL_COUNT)
            .map(|m| RisPanel::in_layout(m, params.ris_side))
            .collect();
        Ok(Self {
            params,
            bs,
            cellular_users,
            d2d_pairs: pairs,
            ris_panels,
            links,
        })
    }

    pub fn num_d2d(&self) -> usize {
        self.d2d_pairs.len()
    }

    pub fn num_cellular(&self) -> usize {
        self.cellular_users.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    /// Receiver slots: one per D2D receiver plus the BS.
    pub fn num_rx_slots(&self) -> usize {
        self.num_d2d() + 1
    }

    pub fn bs_slot(&self) -> usize {
        self.num_d2d()
    }

    pub fn rx_slot(&self, link: usize) -> usize {
        if link < self.num_d2d() {
            link
        } else {
            self.bs_slot()
        }
    }

    pub fn rx_slot_node(&self, slot: usize) -> &Node {
        if slot < self.num_d2d() {
            &self.d2d_pairs[slot].rx
        } else {
            &self.bs
        }
    }

    pub fn tx_node(&self, link: usize) -> &Node {
        let d = self.num_d2d();
        if link < d {
            &self.d2d_pairs[link].tx
        } else {
            &self.cellular_users[link - d]
        }
    }

    pub fn rx_node(&self, link: usize) -> &Node {
        self.rx_slot_node(self.rx_slot(link))
    }

    pub fn is_d2d(&self, link: usize) -> bool {
        link < self.num_d2d()
    }

    /// Cellular user index of an uplink link id.
    pub fn cellular_index(&self, link: usize) -> Option<usize> {
        (link >= self.num_d2d() && link < self.num_links()).then(|| link - self.num_d2d())
    }

    pub fn uplink_of(&self, cellular_user: usize) -> usize {
        self.num_d2d() + cellular_user
    }

    pub fn link_length(&self, link: usize) -> f64 {
        self.tx_node(link)
            .position
            .distance(&self.rx_node(link).position)
    }

    /// Panel nearest to the midpoint of each link (ties to the lower id).
    pub fn nearest_panel_assist(&self) -> Vec<usize> {
        (0..self.num_links())
            .map(|l| {
                let mid = self
                    .tx_node(l)
                    .position
                    .midpoint(&self.rx_node(l).position);
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for p in &self.ris_panels {
                    let dist = p.center().distance(&mid);
                    if dist < best_d {
                        best_d = dist;
                        best = p.id;
                    }
                }
                best
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.params.validate()?;
        Ok(s)
    }
}

const KEY_CELLULAR: u64 = 1;
const KEY_PAIR: u64 = 2;

/// Independent generator for entity `index` of class `class`.
fn keyed_rng(seed: u64, class: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((class << 32) | index as u64);
    rng
}

/// Random deployment with `cellular` users and `d2d` pairs, fully determined
/// by `(params, cellular, d2d, seed)`. Each user and each pair draws from its
/// own stream, so user `i` lands in the same place for any `C > i`, and pair
/// `i` for any `D > i`.
pub fn generate_scenario(
    params: &SimParams,
    cellular: usize,
    d2d: usize,
    seed: u64,
) -> Result<Scenario> {
    params.validate()?;
    if d2d == 0 {
        return Err(Error::param("D", "at least one D2D pair is required"));
    }
    if cellular + d2d > MAX_USERS {
        return Err(Error::Placement(format!(
            "C + D = {} exceeds the supported maximum of {MAX_USERS}",
            cellular + d2d
        )));
    }
    let cus: Vec<Point3> = (0..cellular)
        .map(|i| {
            let mut rng = keyed_rng(seed, KEY_CELLULAR, i);
            (0..MAX_PLACEMENT_RETRIES)
                .map(|_| uniform_in_area(&mut rng))
                .find(|p| p.distance(&BS_POSITION) > 0.0)
                .ok_or_else(|| Error::Placement("cellular user coincides with the BS".into()))
        })
        .collect::<Result<_>>()?;
    let mut pairs = Vec::with_capacity(d2d);
    for i in 0..d2d {
        let mut rng = keyed_rng(seed, KEY_PAIR, i);
        let tx = uniform_in_area(&mut rng);
        let mut rx = None;
        for _ in 0..MAX_PLACEMENT_RETRIES {
            let r = params.r_max * rng.random::<f64>().sqrt();
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let cand = Point3([tx.x() + r * phi.cos(), tx.y() + r * phi.sin(), 0.0]);
            if in_area(&cand) && cand.distance(&tx) > 0.0 && cand.distance(&tx) <= params.r_max
            {
                rx = Some(cand);
                break;
            }
        }
        let rx = rx.ok_or_else(|| {
            Error::Placement(format!("could not place receiver of D2D pair {i}"))
        })?;
        pairs.push((tx, rx));
    }
    Scenario::from_positions(params.clone(), &cus, &pairs)
}

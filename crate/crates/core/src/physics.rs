//! Quasi-static planar contact physics.
//!
//! The model is deliberately desk-scale: a rigid 2-D object held by one to
//! five single-axis fingertips. Each finger advances along a fixed inward
//! site normal; contact is a one-sided spring, so
//! `normal_force = stiffness * max(0, penetration)`.
//!
//! Per tick the world
//!
//! 1. integrates commanded finger motion (normal advance, optional
//!    tangential travel),
//! 2. relaxes the object position toward compliance equilibrium — forces
//!    balance through the object because the contacts are springs — moving
//!    at most a bounded distance per tick so escaping contacts shed force
//!    gradually rather than teleporting,
//! 3. applies an aggregate Coulomb check: if the total available friction
//!    `sum(mu * normal_force)` is at least the residual load magnitude the
//!    object is static, otherwise it slides along the residual at a speed
//!    proportional to the force deficit and every touching contact reports
//!    a positive slip speed.
//!
//! There is no inertia and no moment balance; loads are pure forces. The
//! model exists to exercise the sensing/prediction/control loop, not to be
//! a contact simulator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

pub const GRAVITY_MPS2: f64 = 9.81;

/// Object slide speed per newton of friction deficit.
pub const SLIDE_MPS_PER_N: f64 = 0.02;

/// Extra load, beyond the kinetic friction budget, needed to break a
/// static contact patch loose.
pub const STICTION_BAND_N: f64 = 0.25;

/// A sliding object latches static once its friction deficit falls below
/// this. Together with [`STICTION_BAND_N`] it forms a hysteresis loop, so
/// near-balanced grips come to rest instead of creeping indefinitely.
pub const LATCH_DEFICIT_N: f64 = 0.15;

/// Compliance relaxation speed limit: how fast the object may drift toward
/// force balance. Bounding this keeps a freshly unbalanced grip (or an
/// escaping object) shedding force over a few ticks instead of in one jump.
pub const COMPLIANCE_MPS: f64 = 1.0;

/// A run counts as dropped once the object has moved this far from its pose
/// at handover.
pub const DROP_DISPLACEMENT_M: f64 = 0.030;

/// Compliant displacement considered damaging for deformable objects; the
/// per-contact force budget is `stiffness * DEFORMATION_LIMIT_M`.
pub const DEFORMATION_LIMIT_M: f64 = 0.005;

/// Viscous coefficient used only to report the tangential load of a finger
/// that is being dragged across a held object (kinetic friction plus a
/// speed-proportional term), N per m/s.
const DRAG_VISCOUS_N_PER_MPS: f64 = 5.0;

/// Nominal fingertip-ring radius used to place site anchors, m. Cosmetic:
/// it only affects reported fingertip positions, not forces.
const SITE_RING_RADIUS_M: f64 = 0.03;

const SOLVER_MAX_ITERS: usize = 40;

/// One allowed fingertip placement on an object: where the pad sits and
/// which way it pushes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactSite {
    /// Unit direction the finger pushes the object (points into the body).
    pub normal: Vec2,
    /// Surface point of the site when the object is at its rest pose.
    pub anchor: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    pub mass_kg: f64,
    pub friction_mu: f64,
    /// Contact (skin + body) stiffness, N/m. Low values model squishy
    /// objects; the deformation budget scales with it.
    pub stiffness_n_per_m: f64,
    /// Allowed finger sites, thumb first. A grip of `n` fingers uses the
    /// first `n` sites.
    pub sites: Vec<ContactSite>,
}

impl ObjectSpec {
    pub fn new(
        id: &str,
        mass_kg: f64,
        friction_mu: f64,
        stiffness_n_per_m: f64,
        sites: Vec<ContactSite>,
    ) -> Result<ObjectSpec> {
        if !(mass_kg > 0.0) {
            return Err(Error::validation(format!("object {id}: mass must be > 0")));
        }
        if !(friction_mu > 0.0 && friction_mu <= 2.0) {
            return Err(Error::validation(format!(
                "object {id}: friction coefficient must be in (0, 2] (got {friction_mu})"
            )));
        }
        if !(stiffness_n_per_m > 0.0) {
            return Err(Error::validation(format!("object {id}: stiffness must be > 0")));
        }
        if sites.is_empty() {
            return Err(Error::validation(format!("object {id}: needs at least one site")));
        }
        for (i, s) in sites.iter().enumerate() {
            if (s.normal.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::validation(format!(
                    "object {id}: site {i} normal is not unit length"
                )));
            }
        }
        Ok(ObjectSpec {
            id: id.to_string(),
            mass_kg,
            friction_mu,
            stiffness_n_per_m,
            sites,
        })
    }

    pub fn weight(&self) -> Vec2 {
        Vec2::new(0.0, -self.mass_kg * GRAVITY_MPS2)
    }

    /// Per-contact force above which a deformable object is considered
    /// damaged (compliant displacement beyond [`DEFORMATION_LIMIT_M`]).
    pub fn deformation_budget_n(&self) -> f64 {
        self.stiffness_n_per_m * DEFORMATION_LIMIT_M
    }
}

/// Shared five-site pattern: a thumb on one side, two squarely opposing
/// fingers, and ring/little sites that curl under the object — their push
/// directions tilt upward, so they oppose the thumb a little less per
/// newton but cradle part of the weight.
fn standard_sites() -> Vec<ContactSite> {
    let ring_tilt = 15f64.to_radians();
    let little_tilt = 22f64.to_radians();
    let normals = [
        Vec2::new(1.0, 0.0),
        Vec2::new(-1.0, 0.0),
        Vec2::new(-1.0, 0.0),
        Vec2::new(-ring_tilt.cos(), ring_tilt.sin()),
        Vec2::new(-little_tilt.cos(), little_tilt.sin()),
    ];
    // Spread anchors of repeated directions so reported fingertip positions
    // stay distinct.
    let spreads = [0.0, 0.010, -0.010, 0.018, -0.018];
    normals
        .iter()
        .zip(spreads.iter())
        .map(|(&n, &s)| ContactSite {
            normal: n,
            anchor: -n * SITE_RING_RADIUS_M + n.perp() * s,
        })
        .collect()
}

/// The four test objects. Masses, friction and stiffness are desk-scale
/// choices: the tuna can is the heaviest, the plastic cup much softer than
/// everything else.
pub fn object_catalog() -> Vec<ObjectSpec> {
    vec![
        ObjectSpec::new("ball", 0.5, 0.5, 1500.0, standard_sites()).unwrap(),
        ObjectSpec::new("box", 0.35, 0.6, 2000.0, standard_sites()).unwrap(),
        ObjectSpec::new("tuna_can", 0.7, 0.5, 2500.0, standard_sites()).unwrap(),
        ObjectSpec::new("plastic_cup", 0.12, 0.45, 600.0, standard_sites()).unwrap(),
    ]
}

pub fn object_by_id(id: &str) -> Result<ObjectSpec> {
    object_catalog()
        .into_iter()
        .find(|o| o.id == id)
        .ok_or_else(|| {
            Error::validation(format!(
                "unknown object '{id}' (known: ball, box, tuna_can, plastic_cup)"
            ))
        })
}

/// Smallest uniform per-finger normal force that keeps a symmetric grip
/// static under `load`: the aggregate friction `finger_count * mu * f` must
/// cover the load magnitude.
pub fn min_stabilizing_force(friction_mu: f64, finger_count: usize, load: Vec2) -> Result<f64> {
    if finger_count == 0 {
        return Err(Error::validation(
            "min stabilizing force: finger_count must be >= 1".to_string(),
        ));
    }
    if !(friction_mu > 0.0) {
        return Err(Error::validation(format!(
            "min stabilizing force undefined for friction coefficient {friction_mu} (must be > 0)"
        )));
    }
    Ok(load.norm() / (finger_count as f64 * friction_mu))
}

/// Commanded fingertip motion for one tick.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FingerCommand {
    /// Speed along the site normal, m/s. Positive advances into the object.
    pub advance_mps: f64,
    /// Speed across the surface, m/s (used by data-collection surveying).
    pub tangential_mps: f64,
}

/// Contact report for one finger after a tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactState {
    pub finger: usize,
    pub in_contact: bool,
    pub normal_force_n: f64,
    /// Signed tangential force carried at this contact, N. Exceeds
    /// `mu * normal_force` in magnitude exactly when the contact slips.
    pub tangential_load_n: f64,
    /// Relative tangential speed between fingertip and object surface, m/s.
    pub slip_speed_mps: f64,
    /// Direction this contact pushes the object (unit).
    pub contact_normal: Vec2,
    pub fingertip_pos: Vec2,
}

/// World-level outcome of one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub contacts: Vec<ContactState>,
    pub object_pos: Vec2,
    /// Aggregate slide speed of the object, m/s (0 when static).
    pub slide_speed_mps: f64,
    /// Residual load after normal-force balance, N.
    pub load_residual_n: f64,
    /// Total available friction, N.
    pub friction_budget_n: f64,
}

#[derive(Debug, Clone)]
struct FingerBody {
    site: usize,
    /// Advance along the site normal; 0 touches the rest-pose surface.
    advance_m: f64,
    /// Travel across the surface from the site anchor.
    tangential_m: f64,
}

/// One grip scene: an object plus fingers, optionally a scripted partner
/// contact, stepped quasi-statically.
#[derive(Debug, Clone)]
pub struct World {
    pub object: ObjectSpec,
    fingers: Vec<FingerBody>,
    /// Fixed intrusion contact (an externally controlled opposing pad).
    partner: Option<FingerBody>,
    object_pos: Vec2,
    /// When true the object is rigidly held (data-collection rig): it
    /// ignores force balance, and finger tangential motion is surface slip.
    fixed_object: bool,
    /// Stiction state: true while the object is actually sliding.
    sliding: bool,
}

impl World {
    /// A free object gripped by the first `finger_count` sites.
    pub fn grip(object: ObjectSpec, finger_count: usize) -> Result<World> {
        if finger_count == 0 || finger_count > object.sites.len() {
            return Err(Error::validation(format!(
                "object {} supports 1..={} fingers (got {finger_count})",
                object.id,
                object.sites.len()
            )));
        }
        let fingers = (0..finger_count)
            .map(|site| FingerBody {
                site,
                advance_m: 0.0,
                tangential_m: 0.0,
            })
            .collect();
        Ok(World {
            object,
            fingers,
            partner: None,
            object_pos: Vec2::ZERO,
            fixed_object: false,
            sliding: false,
        })
    }

    /// A rigidly held object probed by fingers at the given sites.
    pub fn fixed_rig(object: ObjectSpec, sites: &[usize]) -> Result<World> {
        for &s in sites {
            if s >= object.sites.len() {
                return Err(Error::validation(format!(
                    "object {} has no site {s}",
                    object.id
                )));
            }
        }
        let fingers = sites
            .iter()
            .map(|&site| FingerBody {
                site,
                advance_m: -0.005, // parked 5 mm off the surface
                tangential_m: 0.0,
            })
            .collect();
        Ok(World {
            object,
            fingers,
            partner: None,
            object_pos: Vec2::ZERO,
            fixed_object: true,
            sliding: false,
        })
    }

    /// Attach a scripted opposing contact at the given site. Its intrusion
    /// is position-clamped: set it explicitly per tick.
    pub fn attach_partner(&mut self, site: usize) -> Result<()> {
        if site >= self.object.sites.len() {
            return Err(Error::validation(format!(
                "object {} has no site {site}",
                self.object.id
            )));
        }
        if self.fingers.iter().any(|f| f.site == site) {
            return Err(Error::validation(format!(
                "site {site} is already taken by a finger"
            )));
        }
        self.partner = Some(FingerBody {
            site,
            advance_m: 0.0,
            tangential_m: 0.0,
        });
        Ok(())
    }

    /// Set the partner intrusion so that its nominal force (at the current
    /// object pose) equals `force_n`.
    pub fn set_partner_force(&mut self, force_n: f64) {
        let pos = self.object_pos;
        let k = self.object.stiffness_n_per_m;
        if let Some(p) = self.partner.as_mut() {
            let n = self.object.sites[p.site].normal;
            p.advance_m = force_n.max(0.0) / k + pos.dot(n);
        }
    }

    pub fn partner_force_n(&self) -> f64 {
        self.partner
            .as_ref()
            .map(|p| {
                let n = self.object.sites[p.site].normal;
                self.object.stiffness_n_per_m * (p.advance_m - self.object_pos.dot(n)).max(0.0)
            })
            .unwrap_or(0.0)
    }

    /// Set the partner's absolute intrusion coordinate directly (a
    /// position-held pad; its force then follows the object passively).
    pub fn set_partner_intrusion(&mut self, advance_m: f64) {
        if let Some(p) = self.partner.as_mut() {
            p.advance_m = advance_m;
        }
    }

    pub fn partner_intrusion(&self) -> Option<f64> {
        self.partner.as_ref().map(|p| p.advance_m)
    }

    pub fn partner_site_normal(&self) -> Option<Vec2> {
        self.partner
            .as_ref()
            .map(|p| self.object.sites[p.site].normal)
    }

    /// Preload every finger to the same normal force at the current pose.
    pub fn engage_grip(&mut self, force_n: f64) {
        let k = self.object.stiffness_n_per_m;
        let pos = self.object_pos;
        for f in self.fingers.iter_mut() {
            let n = self.object.sites[f.site].normal;
            f.advance_m = force_n.max(0.0) / k + pos.dot(n);
        }
    }

    /// Park every finger off the surface by `gap_m`.
    pub fn park_fingers(&mut self, gap_m: f64) {
        let pos = self.object_pos;
        for f in self.fingers.iter_mut() {
            let n = self.object.sites[f.site].normal;
            f.advance_m = pos.dot(n) - gap_m.abs();
        }
    }

    pub fn finger_count(&self) -> usize {
        self.fingers.len()
    }

    pub fn object_pos(&self) -> Vec2 {
        self.object_pos
    }

    pub fn site_normal(&self, finger: usize) -> Vec2 {
        self.object.sites[self.fingers[finger].site].normal
    }

    fn penetration(&self, body: &FingerBody, pos: Vec2) -> f64 {
        let n = self.object.sites[body.site].normal;
        body.advance_m - pos.dot(n)
    }

    fn fingertip_pos(&self, body: &FingerBody) -> Vec2 {
        let site = &self.object.sites[body.site];
        site.anchor + site.normal * body.advance_m + site.normal.perp() * body.tangential_m
    }

    /// Force-weighted outer products of the active contact normals at pose
    /// `pos` (three distinct entries of a symmetric 2x2). Its eigenvalues
    /// say how much normal force actually acts along each direction.
    fn normal_force_matrix(&self, pos: Vec2) -> (f64, f64, f64) {
        let k = self.object.stiffness_n_per_m;
        let (mut mxx, mut mxy, mut myy) = (0.0, 0.0, 0.0);
        for body in self.fingers.iter().chain(self.partner.iter()) {
            let depth = self.penetration(body, pos);
            if depth > 0.0 {
                let n = self.object.sites[body.site].normal;
                let f = k * depth;
                mxx += f * n.x * n.x;
                mxy += f * n.x * n.y;
                myy += f * n.y * n.y;
            }
        }
        (mxx, mxy, myy)
    }

    /// Residual force on the object and the active contact stiffness matrix
    /// (as its three distinct entries) at pose `pos`.
    fn residual(&self, pos: Vec2, external: Vec2) -> (Vec2, f64, f64, f64) {
        let k = self.object.stiffness_n_per_m;
        let mut r = external;
        let (mut kxx, mut kxy, mut kyy) = (0.0, 0.0, 0.0);
        for body in self.fingers.iter().chain(self.partner.iter()) {
            let depth = self.penetration(body, pos);
            if depth > 0.0 {
                let n = self.object.sites[body.site].normal;
                r += n * (k * depth);
                kxx += k * n.x * n.x;
                kxy += k * n.x * n.y;
                kyy += k * n.y * n.y;
            }
        }
        (r, kxx, kxy, kyy)
    }

    /// Newton step toward force balance using the pseudo-inverse of the
    /// active stiffness matrix, restricted to the squeeze directions the
    /// contact normal forces actually own. Directions that are tangential
    /// at the load-bearing contacts are deliberately left alone: moving
    /// there is sliding, and sliding belongs to the friction model, not to
    /// compliance. Without the restriction a grazing tilted contact would
    /// let the solver lower the object straight through a latched grip.
    fn relax_pose(&mut self, external: Vec2, budget_m: f64) {
        let mut remaining = budget_m;
        let eig_floor = 1e-9 * self.object.stiffness_n_per_m;
        for _ in 0..SOLVER_MAX_ITERS {
            if remaining <= 1e-15 {
                break;
            }
            let (r, kxx, kxy, kyy) = self.residual(self.object_pos, external);
            let (mxx, mxy, myy) = self.normal_force_matrix(self.object_pos);
            let owned = project_spring_owned(mxx, mxy, myy, r);
            let step =
                project_spring_owned(mxx, mxy, myy, pinv_mul(kxx, kxy, kyy, owned, eig_floor));
            let norm = step.norm();
            if norm < 1e-13 {
                break;
            }
            let capped = if norm > remaining {
                step * (remaining / norm)
            } else {
                step
            };
            self.object_pos += capped;
            remaining -= capped.norm();
        }
    }

    /// Advance one tick. `commands` must supply one entry per finger; the
    /// external force is whatever acts on the object besides gravity and
    /// the contacts (support rigs, disturbance pulses).
    pub fn step(
        &mut self,
        commands: &[FingerCommand],
        external_force: Vec2,
        dt: f64,
    ) -> Result<StepOutcome> {
        if commands.len() != self.fingers.len() {
            return Err(Error::validation(format!(
                "expected {} finger commands, got {}",
                self.fingers.len(),
                commands.len()
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::validation(format!("dt must be > 0 (got {dt})")));
        }
        for (body, cmd) in self.fingers.iter_mut().zip(commands) {
            body.advance_m += cmd.advance_mps * dt;
            body.tangential_m += cmd.tangential_mps * dt;
        }

        if self.fixed_object {
            return Ok(self.fixed_outcome(commands));
        }

        let total_external = self.object.weight() + external_force;
        self.relax_pose(total_external, COMPLIANCE_MPS * dt);

        // Aggregate Coulomb check at the relaxed pose. Whatever force the
        // squeeze directions do not own presses tangentially on the
        // load-bearing contacts, so that part — and only that part — must
        // get past friction before the object moves.
        let (residual, ..) = self.residual(self.object_pos, total_external);
        let (mxx, mxy, myy) = self.normal_force_matrix(self.object_pos);
        let friction_load = residual - project_spring_owned(mxx, mxy, myy, residual);
        let load = friction_load.norm();
        let mu = self.object.friction_mu;
        let mut budget = 0.0;
        for body in self.fingers.iter().chain(self.partner.iter()) {
            let depth = self.penetration(body, self.object_pos);
            if depth > 0.0 {
                budget += mu * self.object.stiffness_n_per_m * depth;
            }
        }

        // Stiction hysteresis: breaking loose takes more imbalance than
        // staying loose, and a sliding object latches once nearly balanced.
        let deficit = load - budget;
        if self.sliding {
            if deficit < LATCH_DEFICIT_N {
                self.sliding = false;
            }
        } else if deficit > STICTION_BAND_N {
            self.sliding = true;
        }
        let slide_speed = if self.sliding {
            SLIDE_MPS_PER_N * deficit
        } else {
            0.0
        };
        if slide_speed > 0.0 {
            if let Some(dir) = friction_load.normalized() {
                self.object_pos += dir * (slide_speed * dt);
            }
        }

        let contacts = self
            .fingers
            .iter()
            .enumerate()
            .map(|(i, body)| {
                let n = self.object.sites[body.site].normal;
                let depth = self.penetration(body, self.object_pos);
                let in_contact = depth > 0.0;
                let force = self.object.stiffness_n_per_m * depth.max(0.0);
                // Contacts share the carried load in proportion to their
                // friction capacity, which keeps the per-contact Coulomb
                // inequality aligned with the aggregate verdict: only a
                // sliding patch carries more than `mu * force` (a latched
                // one saturates at its limit).
                let carried = if self.sliding { load } else { load.min(budget) };
                let share = if in_contact && budget > 0.0 {
                    carried * (mu * force) / budget
                } else {
                    0.0
                };
                let sign = if friction_load.dot(n.perp()) >= 0.0 {
                    1.0
                } else {
                    -1.0
                };
                ContactState {
                    finger: i,
                    in_contact,
                    normal_force_n: force,
                    tangential_load_n: sign * share,
                    slip_speed_mps: if in_contact { slide_speed } else { 0.0 },
                    contact_normal: n,
                    fingertip_pos: self.fingertip_pos(body),
                }
            })
            .collect();

        Ok(StepOutcome {
            contacts,
            object_pos: self.object_pos,
            slide_speed_mps: slide_speed,
            load_residual_n: load,
            friction_budget_n: budget,
        })
    }

    /// Outcome for the rigidly held object: penetration comes straight from
    /// finger advance, and slip is the finger's own surface travel.
    fn fixed_outcome(&self, commands: &[FingerCommand]) -> StepOutcome {
        let k = self.object.stiffness_n_per_m;
        let mu = self.object.friction_mu;
        let mut budget = 0.0;
        let contacts: Vec<ContactState> = self
            .fingers
            .iter()
            .enumerate()
            .map(|(i, body)| {
                let n = self.object.sites[body.site].normal;
                let depth = self.penetration(body, Vec2::ZERO);
                let in_contact = depth > 0.0;
                let force = k * depth.max(0.0);
                if in_contact {
                    budget += mu * force;
                }
                let speed = commands[i].tangential_mps;
                let slipping = in_contact && speed.abs() > 0.0;
                // A dragged finger carries kinetic friction plus a viscous
                // term; parked or resting fingers carry nothing.
                let drag = if slipping {
                    speed.signum() * (mu * force + DRAG_VISCOUS_N_PER_MPS * speed.abs())
                } else {
                    0.0
                };
                ContactState {
                    finger: i,
                    in_contact,
                    normal_force_n: force,
                    tangential_load_n: drag,
                    slip_speed_mps: if slipping { speed.abs() } else { 0.0 },
                    contact_normal: n,
                    fingertip_pos: self.fingertip_pos(body),
                }
            })
            .collect();
        StepOutcome {
            contacts,
            object_pos: Vec2::ZERO,
            slide_speed_mps: 0.0,
            load_residual_n: 0.0,
            friction_budget_n: budget,
        }
    }
}

/// Multiply the pseudo-inverse of the symmetric 2x2 matrix
/// `[[kxx, kxy], [kxy, kyy]]` by `v`, treating eigenvalues at or below
/// `floor` as zero.
/// Share of the total contact normal force that must act along a direction
/// before the pose solver owns it. Below this, a direction is treated as
/// tangential at the grip's load-bearing contacts and left to friction.
const POSE_OWNED_MIN_FRACTION: f64 = 0.35;

/// Project `v` onto the eigendirections of the force-weighted normal
/// matrix (mxx, mxy, myy) whose eigenvalue carries at least
/// `POSE_OWNED_MIN_FRACTION` of the trace. With no active contacts the
/// projection is zero.
fn project_spring_owned(mxx: f64, mxy: f64, myy: f64, v: Vec2) -> Vec2 {
    let total = mxx + myy;
    if total <= 0.0 {
        return Vec2::ZERO;
    }
    let floor = POSE_OWNED_MIN_FRACTION * total;
    if mxy.abs() <= 1e-12 * (mxx.abs() + myy.abs()) + 1e-300 {
        return Vec2::new(
            if mxx >= floor { v.x } else { 0.0 },
            if myy >= floor { v.y } else { 0.0 },
        );
    }
    let half_tr = 0.5 * (mxx + myy);
    let disc = (0.25 * (mxx - myy) * (mxx - myy) + mxy * mxy).sqrt();
    let mut out = Vec2::ZERO;
    for lambda in [half_tr + disc, half_tr - disc] {
        if lambda < floor {
            continue;
        }
        if let Some(u) = Vec2::new(mxy, lambda - mxx).normalized() {
            out += u * u.dot(v);
        }
    }
    out
}

fn pinv_mul(kxx: f64, kxy: f64, kyy: f64, v: Vec2, floor: f64) -> Vec2 {
    // Effectively diagonal (including the repeated-eigenvalue case):
    // invert per axis.
    if kxy.abs() <= 1e-12 * (kxx.abs() + kyy.abs()) + 1e-300 {
        let x = if kxx > floor { v.x / kxx } else { 0.0 };
        let y = if kyy > floor { v.y / kyy } else { 0.0 };
        return Vec2::new(x, y);
    }
    // With a genuine off-diagonal entry the eigenvalues are distinct and
    // (kxy, lambda - kxx) is a valid, nonzero eigenvector for either one.
    let half_tr = 0.5 * (kxx + kyy);
    let disc = (0.25 * (kxx - kyy) * (kxx - kyy) + kxy * kxy).sqrt();
    let mut out = Vec2::ZERO;
    for lambda in [half_tr + disc, half_tr - disc] {
        if lambda <= floor {
            continue;
        }
        if let Some(u) = Vec2::new(kxy, lambda - kxx).normalized() {
            out += u * (u.dot(v) / lambda);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball() -> ObjectSpec {
        object_by_id("ball").unwrap()
    }

    /// Independent force-balance oracle for a symmetric opposed grip:
    /// static exactly when `mu * (f_left + f_right) >= |load|`.
    fn opposed_grip_is_static(f_per_finger: f64, mu: f64, load_n: f64) -> bool {
        mu * 2.0 * f_per_finger >= load_n
    }

    #[test]
    fn opposed_grip_holds_half_kilo_at_five_newtons() {
        let obj = ball();
        let mut w = World::grip(obj, 2).unwrap();
        w.engage_grip(5.0);
        let cmds = [FingerCommand::default(); 2];
        let out = w.step(&cmds, Vec2::ZERO, 0.001).unwrap();
        assert!(opposed_grip_is_static(5.0, 0.5, 0.5 * GRAVITY_MPS2));
        assert_eq!(out.slide_speed_mps, 0.0);
        for c in &out.contacts {
            assert!(c.in_contact);
            assert!((c.normal_force_n - 5.0).abs() < 1e-9);
            assert_eq!(c.slip_speed_mps, 0.0);
            assert!(c.tangential_load_n.abs() <= 0.5 * c.normal_force_n + 1e-12);
        }
    }

    #[test]
    fn single_finger_cannot_hold_and_reports_slip() {
        let obj = ball();
        let mut w = World::grip(obj, 1).unwrap();
        w.engage_grip(5.0);
        let out = w.step(&[FingerCommand::default()], Vec2::ZERO, 0.001).unwrap();
        assert!(!opposed_grip_is_static(5.0 / 2.0, 0.5, 0.5 * GRAVITY_MPS2));
        assert!(out.slide_speed_mps > 0.0);
        let c = &out.contacts[0];
        assert!(c.in_contact, "contact persists while the object escapes");
        assert!(c.slip_speed_mps > 0.0);
        assert!(c.tangential_load_n.abs() > obj_mu() * c.normal_force_n);
    }

    fn obj_mu() -> f64 {
        ball().friction_mu
    }

    #[test]
    fn unsupported_object_falls() {
        let obj = ball();
        let mut w = World::grip(obj, 2).unwrap();
        w.park_fingers(0.002);
        let cmds = [FingerCommand::default(); 2];
        let out = w.step(&cmds, Vec2::ZERO, 0.001).unwrap();
        assert!(out.contacts.iter().all(|c| !c.in_contact));
        assert!(out.slide_speed_mps > 0.0);
        assert!(out.object_pos.y < 0.0);
        // Falls at the deficit rate for its full weight.
        let expected = SLIDE_MPS_PER_N * 0.5 * GRAVITY_MPS2;
        assert!((out.slide_speed_mps - expected).abs() < 1e-9);
    }

    #[test]
    fn min_stabilizing_force_matches_hand_balance() {
        let load = Vec2::new(0.0, -0.5 * GRAVITY_MPS2);
        let f2 = min_stabilizing_force(0.5, 2, load).unwrap();
        assert!((f2 - 4.905).abs() < 1e-9, "got {f2}");
        let f5 = min_stabilizing_force(0.5, 5, load).unwrap();
        assert!((f5 - 1.962).abs() < 1e-9, "got {f5}");
    }

    #[test]
    fn min_stabilizing_force_rejects_zero_friction() {
        let load = Vec2::new(0.0, -1.0);
        let err = min_stabilizing_force(0.0, 2, load).unwrap_err();
        assert!(err.to_string().contains("friction"));
    }

    /// Bisection against the stepper itself: starting from rest, a
    /// symmetric two-finger grip breaks loose exactly when the load exceeds
    /// the kinetic budget by the stiction band — and the closed-form
    /// minimum stabilizing force always holds with the band to spare.
    #[test]
    fn slide_threshold_matches_breakout_hand_balance() {
        let slides_at = |force: f64| -> bool {
            let mut w = World::grip(ball(), 2).unwrap();
            w.engage_grip(force);
            let out = w.step(&[FingerCommand::default(); 2], Vec2::ZERO, 0.001).unwrap();
            out.slide_speed_mps > 0.0
        };
        let (mut lo, mut hi) = (0.0, 20.0);
        assert!(slides_at(lo + 0.01) && !slides_at(hi));
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if slides_at(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // Breakout from rest: mu * 2f + band = |load|.
        let mu = ball().friction_mu;
        let expected = (ball().weight().norm() - STICTION_BAND_N) / (2.0 * mu);
        assert!(
            (hi - expected).abs() < 1e-3,
            "threshold {hi} vs hand balance {expected}"
        );
        // The kinetic-balance minimum is strictly above the breakout point.
        let min_force = min_stabilizing_force(mu, 2, ball().weight()).unwrap();
        assert!(!slides_at(min_force));
    }

    #[test]
    fn compliance_equalizes_uneven_preload() {
        let obj = ball();
        let k = obj.stiffness_n_per_m;
        let mut w = World::grip(obj, 2).unwrap();
        // Uneven preload: 6 N vs 2 N. The object should shift until both
        // springs carry the mean force.
        {
            let pos = w.object_pos();
            let n0 = w.site_normal(0);
            let n1 = w.site_normal(1);
            w.fingers[0].advance_m = 6.0 / k + pos.dot(n0);
            w.fingers[1].advance_m = 2.0 / k + pos.dot(n1);
        }
        let cmds = [FingerCommand::default(); 2];
        let mut out = w.step(&cmds, Vec2::ZERO, 0.001).unwrap();
        for _ in 0..50 {
            out = w.step(&cmds, Vec2::ZERO, 0.001).unwrap();
        }
        let f0 = out.contacts[0].normal_force_n;
        let f1 = out.contacts[1].normal_force_n;
        assert!((f0 - f1).abs() < 1e-6, "forces {f0} vs {f1}");
        assert!((f0 - 4.0).abs() < 1e-6, "mean preserved: {f0}");
    }

    #[test]
    fn fixed_rig_reports_finger_drag_as_slip() {
        let mut w = World::fixed_rig(ball(), &[0, 1, 2]).unwrap();
        // Push finger 0 into the surface, then drag it.
        let dt = 0.01;
        let press = FingerCommand {
            advance_mps: 0.8,
            tangential_mps: 0.0,
        };
        w.step(&[press, FingerCommand::default(), FingerCommand::default()], Vec2::ZERO, dt)
            .unwrap();
        let drag = FingerCommand {
            advance_mps: 0.0,
            tangential_mps: 0.02,
        };
        let out = w
            .step(&[drag, FingerCommand::default(), FingerCommand::default()], Vec2::ZERO, dt)
            .unwrap();
        let c0 = &out.contacts[0];
        assert!(c0.in_contact);
        assert!((c0.slip_speed_mps - 0.02).abs() < 1e-12);
        assert!(c0.tangential_load_n.abs() > ball().friction_mu * c0.normal_force_n);
        assert!(!out.contacts[1].in_contact);
        assert_eq!(out.contacts[1].slip_speed_mps, 0.0);
        assert_eq!(out.object_pos, Vec2::ZERO);
    }

    #[test]
    fn step_rejects_wrong_command_count() {
        let mut w = World::grip(ball(), 2).unwrap();
        assert!(w.step(&[FingerCommand::default()], Vec2::ZERO, 0.001).is_err());
    }

    #[test]
    fn unknown_object_is_a_validation_error() {
        let err = object_by_id("brick").unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("brick"));
    }

    #[test]
    fn deformation_budget_scales_with_stiffness() {
        let cup = object_by_id("plastic_cup").unwrap();
        assert!((cup.deformation_budget_n() - cup.stiffness_n_per_m * 0.005).abs() < 1e-12);
        let tuna = object_by_id("tuna_can").unwrap();
        assert!(cup.deformation_budget_n() < tuna.deformation_budget_n());
    }
}

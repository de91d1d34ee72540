//! Zone partition, bandwidth portioning, subcarrier/power assignment and the
//! constraint checker for allocation plans.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{haps_snr, user_rate, UavInterference};
use crate::error::{PlannerError, Result};
use crate::placement::UavDeployment;
use crate::ris::{cluster_ris, PhaseDesign, RisClustering};
use crate::scenario::Scenario;

/// Relative slack allowed on power-budget sums.
pub const POWER_BUDGET_RTOL: f64 = 1e-12;

/// Bandwidth portioning factor `L_cs / L_uav`.
///
/// `0` gives every subcarrier to the UAVs and `+inf` gives every subcarrier to
/// the CS; both are exact degenerate splits rather than numeric limits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Kappa(pub f64);

impl Kappa {
    pub const UAV_ONLY: Kappa = Kappa(0.0);
    pub const HAPS_ONLY: Kappa = Kappa(f64::INFINITY);
    pub const EQUAL: Kappa = Kappa(1.0);

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Kappa {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Kappa {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let k = match Raw::deserialize(d)? {
            Raw::Num(v) => v,
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "haps-only") => f64::INFINITY,
            Raw::Text(t) if t == "uav-only" => 0.0,
            Raw::Text(t) => t
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("invalid kappa `{t}`")))?,
        };
        if !(k >= 0.0) {
            return Err(serde::de::Error::custom("kappa must be >= 0"));
        }
        Ok(Kappa(k))
    }
}

/// Users split into the UAV zone (within radius R of the center) and the
/// HAPS-RIS zone (the complement).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonePartition {
    pub radius_m: f64,
    /// UAV-zone users, ascending.
    pub uav_zone: Vec<usize>,
    /// HAPS-RIS-zone users, ascending.
    pub haps_zone: Vec<usize>,
}

/// Threshold partition; users exactly at distance `radius_m` join the UAV zone.
pub fn partition(scenario: &Scenario, radius_m: f64) -> ZonePartition {
    let (uav_zone, haps_zone) =
        (0..scenario.user_count()).partition(|&i| scenario.user_radius(i) <= radius_m);
    ZonePartition {
        radius_m,
        uav_zone,
        haps_zone,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSplit {
    pub kappa: Kappa,
    pub cs_subcarriers: usize,
    pub uav_subcarriers: usize,
}

impl BandwidthSplit {
    /// CS sub-band occupies `[0, L_cs)`.
    pub fn cs_band(&self) -> std::ops::Range<usize> {
        0..self.cs_subcarriers
    }

    /// UAV sub-band occupies `[L_cs, L_tot)`.
    pub fn uav_band(&self) -> std::ops::Range<usize> {
        self.cs_subcarriers..self.cs_subcarriers + self.uav_subcarriers
    }
}

/// `L_cs = floor(kappa/(kappa+1) * L_tot)`, `L_uav = L_tot - L_cs`.
pub fn split_bandwidth(kappa: Kappa, total_subcarriers: usize) -> BandwidthSplit {
    let l = total_subcarriers;
    let cs = if kappa.0.is_infinite() {
        l
    } else if kappa.0 <= 0.0 {
        0
    } else {
        // small guard so exact ratios such as 3*64/4 are not floored below
        ((kappa.0 * l as f64 / (kappa.0 + 1.0)) + 1e-9).floor() as usize
    };
    let cs = cs.min(l);
    BandwidthSplit {
        kappa,
        cs_subcarriers: cs,
        uav_subcarriers: l - cs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HapsLink {
    pub user: usize,
    pub subcarriers: Vec<usize>,
    /// Transmit power per listed subcarrier, W.
    pub power_w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavLink {
    pub user: usize,
    pub uav: usize,
    pub subcarriers: Vec<usize>,
    pub power_w: Vec<f64>,
}

impl HapsLink {
    pub fn power_on(&self, subcarrier: usize) -> Option<f64> {
        power_on(&self.subcarriers, &self.power_w, subcarrier)
    }
}

impl UavLink {
    pub fn power_on(&self, subcarrier: usize) -> Option<f64> {
        power_on(&self.subcarriers, &self.power_w, subcarrier)
    }
}

fn power_on(subcarriers: &[usize], power: &[f64], l: usize) -> Option<f64> {
    subcarriers.iter().position(|&s| s == l).map(|i| power[i])
}

/// Concrete user/subcarrier/RIS-cluster and user/UAV assignment with per-link power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub zone: ZonePartition,
    pub split: BandwidthSplit,
    pub ris_clusters: Option<RisClustering>,
    pub haps_links: Vec<HapsLink>,
    pub uav_links: Vec<UavLink>,
    /// Whether UAVs were given disjoint slices of the UAV sub-band.
    pub cross_uav_orthogonal: bool,
}

impl AllocationPlan {
    /// Users in the HAPS zone holding at least one subcarrier and one RIS element.
    pub fn u_haps(&self) -> usize {
        self.haps_links
            .iter()
            .filter(|l| {
                !l.subcarriers.is_empty()
                    && self
                        .ris_clusters
                        .as_ref()
                        .and_then(|c| c.cluster_of(l.user))
                        .is_some_and(|r| !r.is_empty())
            })
            .count()
    }

    pub fn haps_link(&self, user: usize) -> Option<&HapsLink> {
        self.haps_links.iter().find(|l| l.user == user)
    }

    pub fn uav_link(&self, user: usize) -> Option<&UavLink> {
        self.uav_links.iter().find(|l| l.user == user)
    }
}

fn assign_haps(
    zone: &ZonePartition,
    split: &BandwidthSplit,
    scenario: &Scenario,
    seed: u64,
) -> Result<(Option<RisClustering>, Vec<HapsLink>)> {
    let users = &zone.haps_zone;
    if users.is_empty() {
        return Ok((None, Vec::new()));
    }
    let per_user = split.cs_subcarriers / users.len();
    if per_user == 0 {
        return Err(PlannerError::NoSubcarriersForUser { user: users[0] });
    }
    let clusters = cluster_ris(users, scenario.ris_elements, seed)?;
    let power = scenario.p_cs_max_w / (users.len() * per_user) as f64;
    let links = users
        .iter()
        .enumerate()
        .map(|(k, &user)| {
            let start = split.cs_band().start + k * per_user;
            HapsLink {
                user,
                subcarriers: (start..start + per_user).collect(),
                power_w: vec![power; per_user],
            }
        })
        .collect();
    Ok((Some(clusters), links))
}

/// Even split of `total` items over `parts`, remainder to the lowest indices.
fn even_counts(total: usize, parts: usize) -> Vec<usize> {
    let base = total / parts;
    let rem = total % parts;
    (0..parts).map(|k| base + usize::from(k < rem)).collect()
}

fn assign_uav(
    zone: &ZonePartition,
    split: &BandwidthSplit,
    deployment: &UavDeployment,
    scenario: &Scenario,
) -> Result<Vec<UavLink>> {
    if zone.uav_zone.is_empty() || deployment.n_uav == 0 {
        return Ok(Vec::new());
    }
    let band = split.uav_band();
    let strict = scenario.strict_cross_uav_orthogonality;
    let slices: Vec<std::ops::Range<usize>> = if strict {
        let mut start = band.start;
        even_counts(band.len(), deployment.n_uav)
            .into_iter()
            .map(|n| {
                let r = start..start + n;
                start += n;
                r
            })
            .collect()
    } else {
        vec![band.clone(); deployment.n_uav]
    };

    let mut links = Vec::new();
    for (j, slice) in slices.iter().enumerate() {
        let members = deployment.members(j);
        if members.is_empty() {
            continue;
        }
        let counts = even_counts(slice.len(), members.len());
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(PlannerError::NoSubcarriersForUser { user: members[k] });
        }
        let power = scenario.p_uav_max_w / slice.len() as f64;
        let mut start = slice.start;
        for (&user, &n) in members.iter().zip(&counts) {
            links.push(UavLink {
                user,
                uav: j,
                subcarriers: (start..start + n).collect(),
                power_w: vec![power; n],
            });
            start += n;
        }
    }
    links.sort_by_key(|l| l.user);
    Ok(links)
}

/// Builds the full allocation for a zone partition, bandwidth split and UAV
/// deployment over the UAV zone.
///
/// HAPS-zone users receive `floor(L_cs/|C|)` consecutive CS subcarriers and a
/// block of `floor(M/|C|)` RIS elements; CS power is spread uniformly. Members
/// of each UAV share that UAV's band as evenly as possible with uniform power.
/// Floor remainders in the CS band and RIS idle. With no deployment, UAV-zone
/// users stay unassigned.
pub fn build_plan(
    zone: &ZonePartition,
    split: &BandwidthSplit,
    deployment: Option<&UavDeployment>,
    scenario: &Scenario,
    seed: u64,
) -> Result<AllocationPlan> {
    let (ris_clusters, haps_links) = assign_haps(zone, split, scenario, seed)?;
    let uav_links = match deployment {
        Some(d) => assign_uav(zone, split, d, scenario)?,
        None => Vec::new(),
    };
    Ok(AllocationPlan {
        zone: zone.clone(),
        split: *split,
        ris_clusters,
        haps_links,
        uav_links,
        cross_uav_orthogonal: scenario.strict_cross_uav_orthogonality,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    ExclusiveAssociation,
    ZoneConsistency,
    CsPowerBudget,
    UavPowerBudget,
    RisExclusivity,
    CsOrthogonality,
    UavOrthogonality,
    CrossUavOrthogonality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintViolation {
    pub constraint: Constraint,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "uav", rename_all = "kebab-case")]
pub enum Server {
    Haps,
    Uav(usize),
    Unserved,
}

impl fmt::Display for Server {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Server::Haps => write!(f, "haps"),
            Server::Uav(j) => write!(f, "uav-{j}"),
            Server::Unserved => write!(f, "none"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserOutcome {
    pub user: usize,
    pub server: Server,
    pub subcarriers: usize,
    pub power_w: f64,
    pub rate_bps: f64,
    pub meets_min_rate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Every HAPS-zone user meets the minimum rate.
    pub haps_ok: bool,
    /// Every UAV-zone user meets the minimum rate.
    pub uav_ok: bool,
    pub structural_ok: bool,
    pub violating_users: Vec<usize>,
    pub structural_violations: Vec<ConstraintViolation>,
    pub users: Vec<UserOutcome>,
}

impl FeasibilityReport {
    pub fn all_ok(&self) -> bool {
        self.haps_ok && self.uav_ok && self.structural_ok
    }
}

/// Per-user rate of a HAPS link under the collapsed channel model.
pub fn haps_user_rate(
    user: usize,
    plan: &AllocationPlan,
    scenario: &Scenario,
    phase: &PhaseDesign,
) -> Result<f64> {
    let link = plan
        .haps_link(user)
        .ok_or(PlannerError::UnassignedUser { user, subcarrier: 0 })?;
    let snrs = link
        .subcarriers
        .iter()
        .map(|&l| haps_snr(user, l, plan, scenario, phase))
        .collect::<Result<Vec<_>>>()?;
    Ok(user_rate(&snrs, scenario.subcarrier_bandwidth_hz()))
}

pub fn uav_user_rate(
    user: usize,
    plan: &AllocationPlan,
    scenario: &Scenario,
    deployment: &UavDeployment,
) -> Result<f64> {
    uav_rate_with(user, plan, scenario, &UavInterference::new(plan, scenario, deployment))
}

fn uav_rate_with(
    user: usize,
    plan: &AllocationPlan,
    scenario: &Scenario,
    table: &UavInterference,
) -> Result<f64> {
    let link = plan.uav_link(user).ok_or(PlannerError::UnassignedLink {
        user,
        uav: usize::MAX,
        subcarrier: 0,
    })?;
    let snrs = table.link_sinrs(link, scenario)?;
    Ok(user_rate(&snrs, scenario.subcarrier_bandwidth_hz()))
}

/// Structural constraints only: association exclusivity, zone consistency,
/// power budgets, RIS exclusivity and per-node subcarrier orthogonality.
pub fn check_structure(
    plan: &AllocationPlan,
    scenario: &Scenario,
    deployment: Option<&UavDeployment>,
) -> Vec<ConstraintViolation> {
    let mut out = Vec::new();
    let mut flag = |constraint, detail: String| out.push(ConstraintViolation { constraint, detail });

    let haps_zone: BTreeSet<usize> = plan.zone.haps_zone.iter().copied().collect();
    let uav_zone: BTreeSet<usize> = plan.zone.uav_zone.iter().copied().collect();
    if !haps_zone.is_disjoint(&uav_zone) || haps_zone.len() + uav_zone.len() != scenario.user_count() {
        flag(
            Constraint::ZoneConsistency,
            "zones must partition the user set".to_string(),
        );
    }

    // association: at most one HAPS link, at most one UAV link, never both
    let mut haps_users = BTreeMap::<usize, usize>::new();
    for l in &plan.haps_links {
        *haps_users.entry(l.user).or_default() += 1;
        if !haps_zone.contains(&l.user) {
            flag(
                Constraint::ZoneConsistency,
                format!("user {} has a HAPS link but is not in the HAPS zone", l.user),
            );
        }
        if l.subcarriers.len() != l.power_w.len() {
            flag(
                Constraint::ZoneConsistency,
                format!("HAPS link of user {} has mismatched power entries", l.user),
            );
        }
    }
    let mut uav_users = BTreeMap::<usize, usize>::new();
    for l in &plan.uav_links {
        *uav_users.entry(l.user).or_default() += 1;
        if !uav_zone.contains(&l.user) {
            flag(
                Constraint::ZoneConsistency,
                format!("user {} has a UAV link but is not in the UAV zone", l.user),
            );
        }
        if l.subcarriers.len() != l.power_w.len() {
            flag(
                Constraint::ZoneConsistency,
                format!("UAV link of user {} has mismatched power entries", l.user),
            );
        }
        match deployment {
            Some(d) if l.uav < d.n_uav => {
                if d.uav_of(l.user) != Some(l.uav) {
                    flag(
                        Constraint::ZoneConsistency,
                        format!("user {} linked to UAV {} but clustered elsewhere", l.user, l.uav),
                    );
                }
            }
            _ => flag(
                Constraint::ZoneConsistency,
                format!("user {} linked to unknown UAV {}", l.user, l.uav),
            ),
        }
    }
    for (&u, &n) in haps_users.iter().chain(uav_users.iter()) {
        if n > 1 {
            flag(
                Constraint::ExclusiveAssociation,
                format!("user {u} holds {n} links of one kind"),
            );
        }
    }
    for u in haps_users.keys() {
        if uav_users.contains_key(u) {
            flag(
                Constraint::ExclusiveAssociation,
                format!("user {u} is served by both the HAPS-RIS and a UAV"),
            );
        }
    }

    // power budgets
    let cs_total: f64 = plan.haps_links.iter().flat_map(|l| &l.power_w).sum();
    if cs_total > scenario.p_cs_max_w * (1.0 + POWER_BUDGET_RTOL) {
        flag(
            Constraint::CsPowerBudget,
            format!("CS power {cs_total} W exceeds {} W", scenario.p_cs_max_w),
        );
    }
    let mut per_uav = BTreeMap::<usize, f64>::new();
    for l in &plan.uav_links {
        *per_uav.entry(l.uav).or_default() += l.power_w.iter().sum::<f64>();
    }
    for (j, p) in per_uav {
        if p > scenario.p_uav_max_w * (1.0 + POWER_BUDGET_RTOL) {
            flag(
                Constraint::UavPowerBudget,
                format!("UAV {j} power {p} W exceeds {} W", scenario.p_uav_max_w),
            );
        }
    }
    if plan
        .haps_links
        .iter()
        .flat_map(|l| &l.power_w)
        .chain(plan.uav_links.iter().flat_map(|l| &l.power_w))
        .any(|&p| !(p >= 0.0))
    {
        flag(Constraint::CsPowerBudget, "negative or NaN power entry".to_string());
    }

    // RIS exclusivity
    if !plan.haps_links.is_empty() {
        match &plan.ris_clusters {
            None => flag(
                Constraint::RisExclusivity,
                "HAPS links exist without RIS clusters".to_string(),
            ),
            Some(c) => {
                let mut ranges: Vec<(u64, u64, usize)> = c
                    .clusters
                    .iter()
                    .map(|cl| (cl.first_element, cl.first_element + c.elements_per_cluster, cl.user))
                    .collect();
                ranges.sort_unstable();
                for w in ranges.windows(2) {
                    if w[1].0 < w[0].1 {
                        flag(
                            Constraint::RisExclusivity,
                            format!("users {} and {} share RIS elements", w[0].2, w[1].2),
                        );
                    }
                }
                if let Some(last) = ranges.last() {
                    if last.1 > c.total_elements || c.total_elements != scenario.ris_elements {
                        flag(
                            Constraint::RisExclusivity,
                            "RIS cluster exceeds the element count".to_string(),
                        );
                    }
                }
                let mut owners = BTreeMap::<usize, usize>::new();
                for cl in &c.clusters {
                    *owners.entry(cl.user).or_default() += 1;
                }
                for l in &plan.haps_links {
                    if owners.get(&l.user) != Some(&1) || c.elements_per_cluster == 0 {
                        flag(
                            Constraint::RisExclusivity,
                            format!("user {} lacks exactly one non-empty RIS cluster", l.user),
                        );
                    }
                }
            }
        }
    }

    // CS sub-band orthogonality
    let cs_band = plan.split.cs_band();
    let mut cs_used = BTreeSet::new();
    for l in &plan.haps_links {
        for &s in &l.subcarriers {
            if !cs_band.contains(&s) {
                flag(
                    Constraint::CsOrthogonality,
                    format!("user {} uses subcarrier {s} outside the CS band", l.user),
                );
            }
            if !cs_used.insert(s) {
                flag(
                    Constraint::CsOrthogonality,
                    format!("CS subcarrier {s} serves more than one user"),
                );
            }
        }
    }

    // per-UAV orthogonality, and across UAVs in strict mode
    let uav_band = plan.split.uav_band();
    let mut per_uav_used = BTreeMap::<usize, BTreeSet<usize>>::new();
    let mut owner = BTreeMap::<usize, usize>::new();
    for l in &plan.uav_links {
        let used = per_uav_used.entry(l.uav).or_default();
        for &s in &l.subcarriers {
            if !uav_band.contains(&s) {
                flag(
                    Constraint::UavOrthogonality,
                    format!("user {} uses subcarrier {s} outside the UAV band", l.user),
                );
            }
            if !used.insert(s) {
                flag(
                    Constraint::UavOrthogonality,
                    format!("UAV {} subcarrier {s} serves more than one user", l.uav),
                );
            }
            if plan.cross_uav_orthogonal {
                let prev = *owner.entry(s).or_insert(l.uav);
                if prev != l.uav {
                    flag(
                        Constraint::CrossUavOrthogonality,
                        format!("subcarrier {s} used by UAVs {prev} and {}", l.uav),
                    );
                }
            }
        }
    }
    out
}

/// Evaluates every user's rate and every structural constraint of `plan`.
pub fn check_feasibility(
    plan: &AllocationPlan,
    scenario: &Scenario,
    deployment: Option<&UavDeployment>,
    phase: &PhaseDesign,
) -> FeasibilityReport {
    let r0 = scenario.min_rate_bps;
    let table = deployment.map(|d| UavInterference::new(plan, scenario, d));
    let mut users = Vec::with_capacity(scenario.user_count());
    for user in 0..scenario.user_count() {
        let (server, subcarriers, power_w, rate) = if let Some(l) = plan.haps_link(user) {
            let rate = haps_user_rate(user, plan, scenario, phase).unwrap_or(0.0);
            (Server::Haps, l.subcarriers.len(), l.power_w.iter().sum(), rate)
        } else if let (Some(l), Some(t)) = (plan.uav_link(user), &table) {
            let rate = uav_rate_with(user, plan, scenario, t).unwrap_or(0.0);
            (Server::Uav(l.uav), l.subcarriers.len(), l.power_w.iter().sum(), rate)
        } else {
            (Server::Unserved, 0, 0.0, 0.0)
        };
        users.push(UserOutcome {
            user,
            server,
            subcarriers,
            power_w,
            rate_bps: rate,
            meets_min_rate: server != Server::Unserved && rate >= r0,
        });
    }

    let violating_users: Vec<usize> =
        users.iter().filter(|u| !u.meets_min_rate).map(|u| u.user).collect();
    let in_haps: BTreeSet<usize> = plan.zone.haps_zone.iter().copied().collect();
    let haps_ok = violating_users.iter().all(|u| !in_haps.contains(u));
    let uav_ok = violating_users.iter().all(|u| in_haps.contains(u));
    let structural_violations = check_structure(plan, scenario, deployment);
    FeasibilityReport {
        haps_ok,
        uav_ok,
        structural_ok: structural_violations.is_empty(),
        violating_users,
        structural_violations,
        users,
    }
}

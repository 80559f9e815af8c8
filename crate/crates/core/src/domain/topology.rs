use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DomainError, ResourceKind, ResourceSpec};

/// Network fabric tier. The derived ordering is the hierarchy, lowest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    OnBoard,
    RackBackplane,
    InterRack,
    #[serde(rename = "InterDC")]
    InterDc,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::OnBoard, Tier::RackBackplane, Tier::InterRack, Tier::InterDc];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl Tier {
    pub fn name(self) -> &'static str {
        match self {
            Tier::OnBoard => "OnBoard",
            Tier::RackBackplane => "RackBackplane",
            Tier::InterRack => "InterRack",
            Tier::InterDc => "InterDC",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Energy per bit of each tier, in pJ/bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpbTable {
    pub on_board: f64,
    pub rack_backplane: f64,
    pub inter_rack: f64,
    pub inter_dc: f64,
}

impl Default for EpbTable {
    fn default() -> Self {
        EpbTable { on_board: 1.0, rack_backplane: 25.0, inter_rack: 35.0, inter_dc: 500.0 }
    }
}

impl EpbTable {
    pub fn get(&self, tier: Tier) -> f64 {
        match tier {
            Tier::OnBoard => self.on_board,
            Tier::RackBackplane => self.rack_backplane,
            Tier::InterRack => self.inter_rack,
            Tier::InterDc => self.inter_dc,
        }
    }

    pub fn scaled(&self, k: f64) -> EpbTable {
        EpbTable {
            on_board: self.on_board * k,
            rack_backplane: self.rack_backplane * k,
            inter_rack: self.inter_rack * k,
            inter_dc: self.inter_dc * k,
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        for tier in Tier::ALL {
            let v = self.get(tier);
            if !(v.is_finite() && v >= 0.0) {
                return Err(DomainError::InvalidSpec(format!("energy per bit for {tier} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchitectureKind {
    Traditional,
    RackScale,
    PodScale,
}

impl ArchitectureKind {
    pub const ALL: [ArchitectureKind; 3] =
        [ArchitectureKind::Traditional, ArchitectureKind::RackScale, ArchitectureKind::PodScale];

    pub fn name(self) -> &'static str {
        match self {
            ArchitectureKind::Traditional => "traditional",
            ArchitectureKind::RackScale => "rackscale",
            ArchitectureKind::PodScale => "podscale",
        }
    }

    pub fn is_disaggregated(self) -> bool {
        self != ArchitectureKind::Traditional
    }
}

impl fmt::Display for ArchitectureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchitectureKind {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "traditional" => Ok(ArchitectureKind::Traditional),
            "rackscale" | "rack-scale" | "rack" => Ok(ArchitectureKind::RackScale),
            "podscale" | "pod-scale" | "pod" => Ok(ArchitectureKind::PodScale),
            other => Err(DomainError::InvalidLayout(format!("unknown architecture '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Module {
    pub id: u32,
    pub spec: ResourceSpec,
    pub rack: u32,
    /// Server board; only present in traditional topologies.
    pub board: Option<u32>,
}

impl Module {
    pub fn kind(&self) -> ResourceKind {
        self.spec.kind
    }

    pub fn location(&self) -> Location {
        Location { module_id: self.id, rack: self.rack, board: self.board }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Location {
    pub module_id: u32,
    pub rack: u32,
    pub board: Option<u32>,
}

/// Racks, modules and fabric coefficients of one datacentre.
///
/// Module ids equal their position in `modules`; CPU modules come first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub kind: ArchitectureKind,
    pub modules: Vec<Module>,
    pub racks: Vec<u32>,
    pub epb: EpbTable,
}

/// Builds one of the three reference layouts.
///
/// * traditional: server `i` pairs CPU `i` with memory `i` on board `i`; servers go round-robin to racks.
/// * rack-scale: CPU (and memory) module `i` sits in rack `i mod racks`.
/// * pod-scale: the first `ceil(racks / 2)` racks hold only CPUs, the rest only memory;
///   modules are spread round-robin over the racks of their kind.
pub fn build_topology(
    kind: ArchitectureKind,
    n_cpu: u32,
    n_mem: u32,
    racks: u32,
    cpu_spec: ResourceSpec,
    mem_spec: ResourceSpec,
    epb: EpbTable,
) -> Result<Topology, DomainError> {
    if n_cpu == 0 || n_mem == 0 {
        return Err(DomainError::InvalidLayout(format!(
            "need at least one CPU and one memory module (got {n_cpu} CPU, {n_mem} memory)"
        )));
    }
    if racks == 0 {
        return Err(DomainError::InvalidLayout("need at least one rack".into()));
    }
    if cpu_spec.kind != ResourceKind::Cpu || mem_spec.kind != ResourceKind::Mem {
        return Err(DomainError::InvalidSpec("cpu_spec must be of kind cpu and mem_spec of kind mem".into()));
    }
    cpu_spec.validate()?;
    mem_spec.validate()?;
    epb.validate()?;

    let mut modules = Vec::with_capacity((n_cpu + n_mem) as usize);
    match kind {
        ArchitectureKind::Traditional => {
            if n_cpu != n_mem {
                return Err(DomainError::InvalidLayout(format!(
                    "traditional servers pair one CPU with one memory module; got {n_cpu} CPU and {n_mem} memory"
                )));
            }
            if racks > n_cpu {
                return Err(DomainError::InvalidLayout(format!(
                    "{racks} racks cannot all hold one of {n_cpu} servers"
                )));
            }
            for i in 0..n_cpu {
                modules.push(Module { id: i, spec: cpu_spec, rack: i % racks, board: Some(i) });
            }
            for i in 0..n_mem {
                modules.push(Module { id: n_cpu + i, spec: mem_spec, rack: i % racks, board: Some(i) });
            }
        }
        ArchitectureKind::RackScale => {
            if racks > n_cpu.min(n_mem) {
                return Err(DomainError::InvalidLayout(format!(
                    "rack-scale pools need a CPU and a memory module in every rack; {racks} racks for {n_cpu} CPU and {n_mem} memory"
                )));
            }
            for i in 0..n_cpu {
                modules.push(Module { id: i, spec: cpu_spec, rack: i % racks, board: None });
            }
            for i in 0..n_mem {
                modules.push(Module { id: n_cpu + i, spec: mem_spec, rack: i % racks, board: None });
            }
        }
        ArchitectureKind::PodScale => {
            if racks < 2 {
                return Err(DomainError::InvalidLayout(
                    "pod-scale needs at least two racks (CPU racks and memory racks)".into(),
                ));
            }
            let cpu_racks = racks.div_ceil(2);
            let mem_racks = racks - cpu_racks;
            if cpu_racks > n_cpu || mem_racks > n_mem {
                return Err(DomainError::InvalidLayout(format!(
                    "pod-scale with {racks} racks needs at least {cpu_racks} CPU and {mem_racks} memory modules"
                )));
            }
            for i in 0..n_cpu {
                modules.push(Module { id: i, spec: cpu_spec, rack: i % cpu_racks, board: None });
            }
            for i in 0..n_mem {
                modules.push(Module { id: n_cpu + i, spec: mem_spec, rack: cpu_racks + i % mem_racks, board: None });
            }
        }
    }

    let topology = Topology { kind, modules, racks: (0..racks).collect(), epb };
    topology.validate()?;
    Ok(topology)
}

/// Looks up where a module sits.
pub fn locate(topology: &Topology, module_id: u32) -> Result<Location, DomainError> {
    topology.module(module_id).map(Module::location).ok_or(DomainError::UnknownModule(module_id))
}

impl Topology {
    pub fn module(&self, id: u32) -> Option<&Module> {
        self.modules.get(id as usize).filter(|m| m.id == id)
    }

    pub fn modules_of(&self, kind: ResourceKind) -> impl Iterator<Item = &Module> {
        self.modules.iter().filter(move |m| m.kind() == kind)
    }

    pub fn count_of(&self, kind: ResourceKind) -> usize {
        self.modules_of(kind).count()
    }

    /// Number of distinct boards (servers).
    pub fn board_count(&self) -> usize {
        self.modules.iter().filter_map(|m| m.board).collect::<BTreeSet<_>>().len()
    }

    /// Memory module on the same board as `cpu_id`.
    pub fn board_partner(&self, module_id: u32) -> Option<u32> {
        let m = self.module(module_id)?;
        let board = m.board?;
        self.modules.iter().find(|o| o.board == Some(board) && o.kind() != m.kind()).map(|o| o.id)
    }

    /// Checks every structural invariant of the architecture.
    pub fn validate(&self) -> Result<(), DomainError> {
        self.epb.validate()?;
        let racks: BTreeSet<u32> = self.racks.iter().copied().collect();
        if racks.len() != self.racks.len() {
            return Err(DomainError::InvalidLayout("duplicate rack ids".into()));
        }
        for (idx, m) in self.modules.iter().enumerate() {
            if m.id as usize != idx {
                return Err(DomainError::InvalidLayout(format!("module at position {idx} has id {}", m.id)));
            }
            m.spec.validate()?;
            if !racks.contains(&m.rack) {
                return Err(DomainError::InvalidLayout(format!("module {} refers to unknown rack {}", m.id, m.rack)));
            }
        }
        if self.count_of(ResourceKind::Cpu) == 0 || self.count_of(ResourceKind::Mem) == 0 {
            return Err(DomainError::InvalidLayout("topology needs CPU and memory modules".into()));
        }

        match self.kind {
            ArchitectureKind::Traditional => {
                let mut boards: std::collections::BTreeMap<u32, (u32, u32, BTreeSet<u32>)> = Default::default();
                for m in &self.modules {
                    let board = m.board.ok_or_else(|| {
                        DomainError::InvalidLayout(format!("traditional module {} has no board", m.id))
                    })?;
                    let entry = boards.entry(board).or_default();
                    match m.kind() {
                        ResourceKind::Cpu => entry.0 += 1,
                        ResourceKind::Mem => entry.1 += 1,
                    }
                    entry.2.insert(m.rack);
                }
                for (board, (cpus, mems, racks)) in boards {
                    if cpus != 1 || mems != 1 {
                        return Err(DomainError::InvalidLayout(format!(
                            "server {board} must hold exactly one CPU and one memory module (has {cpus} and {mems})"
                        )));
                    }
                    if racks.len() != 1 {
                        return Err(DomainError::InvalidLayout(format!("server {board} spans several racks")));
                    }
                }
            }
            ArchitectureKind::RackScale | ArchitectureKind::PodScale => {
                if let Some(m) = self.modules.iter().find(|m| m.board.is_some()) {
                    return Err(DomainError::InvalidLayout(format!(
                        "disaggregated module {} must not sit on a board",
                        m.id
                    )));
                }
                for &rack in &self.racks {
                    let kinds: BTreeSet<ResourceKind> =
                        self.modules.iter().filter(|m| m.rack == rack).map(Module::kind).collect();
                    let ok = match self.kind {
                        ArchitectureKind::RackScale => kinds.len() == 2,
                        _ => kinds.len() == 1,
                    };
                    if !ok {
                        let rule = if self.kind == ArchitectureKind::RackScale {
                            "every rack-scale rack holds both CPU and memory modules"
                        } else {
                            "every pod-scale rack holds modules of exactly one kind"
                        };
                        return Err(DomainError::InvalidLayout(format!("rack {rack} violates: {rule}")));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(kind: ArchitectureKind, n: u32, racks: u32) -> Result<Topology, DomainError> {
        build_topology(
            kind,
            n,
            n,
            racks,
            ResourceSpec::reference_cpu(),
            ResourceSpec::reference_mem(),
            EpbTable::default(),
        )
    }

    #[test]
    fn traditional_pairs_modules_per_server() {
        let t = build(ArchitectureKind::Traditional, 20, 1).unwrap();
        assert_eq!(t.modules.len(), 40);
        assert_eq!(t.board_count(), 20);
        for board in 0..20 {
            let on_board: Vec<_> = t.modules.iter().filter(|m| m.board == Some(board)).collect();
            assert_eq!(on_board.len(), 2);
            assert_ne!(on_board[0].kind(), on_board[1].kind());
        }
    }

    #[test]
    fn smallest_rack_scale_pool() {
        let t = build(ArchitectureKind::RackScale, 2, 1).unwrap();
        assert_eq!(t.racks, vec![0]);
        assert_eq!(t.count_of(ResourceKind::Cpu), 2);
        assert_eq!(t.count_of(ResourceKind::Mem), 2);
        assert!(t.modules.iter().all(|m| m.rack == 0 && m.board.is_none()));
    }

    #[test]
    fn pod_scale_separates_kinds() {
        let t = build(ArchitectureKind::PodScale, 20, 2).unwrap();
        assert!(t.modules_of(ResourceKind::Cpu).all(|m| m.rack == 0));
        assert!(t.modules_of(ResourceKind::Mem).all(|m| m.rack == 1));
        assert_eq!(t.board_count(), 0);
    }

    #[test]
    fn locate_examples() {
        let t = build(ArchitectureKind::Traditional, 20, 1).unwrap();
        let loc = locate(&t, 3).unwrap();
        assert_eq!(loc, Location { module_id: 3, rack: 0, board: Some(3) });

        let pod = build(ArchitectureKind::PodScale, 20, 2).unwrap();
        // memory module index 5 has id 20 + 5
        assert_eq!(locate(&pod, 25).unwrap().rack, 1);

        let rack = build(ArchitectureKind::RackScale, 20, 2).unwrap();
        assert_eq!(locate(&rack, 4).unwrap().rack, 0);
        assert_eq!(locate(&rack, 5).unwrap().rack, 1);

        assert!(matches!(locate(&rack, 99), Err(DomainError::UnknownModule(99))));
    }

    #[test]
    fn invalid_layouts_are_rejected() {
        let cpu = ResourceSpec::reference_cpu();
        let mem = ResourceSpec::reference_mem();
        let epb = EpbTable::default();
        assert!(build_topology(ArchitectureKind::Traditional, 3, 2, 1, cpu, mem, epb).is_err());
        assert!(build_topology(ArchitectureKind::PodScale, 4, 4, 1, cpu, mem, epb).is_err());
        assert!(build_topology(ArchitectureKind::RackScale, 0, 4, 1, cpu, mem, epb).is_err());
        assert!(build_topology(ArchitectureKind::RackScale, 2, 2, 3, cpu, mem, epb).is_err());
        let err = build_topology(ArchitectureKind::Traditional, 3, 2, 1, cpu, mem, epb).unwrap_err();
        assert!(err.to_string().contains("pair"), "{err}");
    }

    #[test]
    fn validate_catches_mixed_pod_rack() {
        let mut t = build(ArchitectureKind::PodScale, 4, 2).unwrap();
        t.modules[0].rack = 1;
        assert!(t.validate().is_err());
    }

    #[test]
    fn board_partner_lookup() {
        let t = build(ArchitectureKind::Traditional, 4, 2).unwrap();
        assert_eq!(t.board_partner(2), Some(6));
        assert_eq!(t.board_partner(6), Some(2));
        let r = build(ArchitectureKind::RackScale, 4, 2).unwrap();
        assert_eq!(r.board_partner(2), None);
    }
}

//! The fault taxonomy of the Tennessee-Eastman-style benchmark: 21 fault
//! numbers (0 = normal operation), with faults 3, 9, and 15 conventionally
//! excluded as undetectable, leaving 18 detection targets.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultType {
    Step,
    RandomVariation,
    SlowDrift,
    Sticking,
    Unknown,
}

#[derive(Debug, Clone, Copy)]
pub struct FaultInfo {
    pub fault: u8,
    pub description: &'static str,
    /// `None` only for fault 0 (normal operation).
    pub fault_type: Option<FaultType>,
    pub excluded: bool,
}

use FaultType::*;

pub const CATALOG: [FaultInfo; 21] = [
    FaultInfo { fault: 0, description: "Normal operation (no fault)", fault_type: None, excluded: false },
    FaultInfo { fault: 1, description: "A/C feed ratio, B composition constant (stream 4)", fault_type: Some(Step), excluded: false },
    FaultInfo { fault: 2, description: "B composition, A/C ratio constant (stream 4)", fault_type: Some(Step), excluded: false },
    FaultInfo { fault: 3, description: "D feed temperature (stream 2)", fault_type: Some(Step), excluded: true },
    FaultInfo { fault: 4, description: "Reactor cooling water inlet temperature", fault_type: Some(Step), excluded: false },
    FaultInfo { fault: 5, description: "Condenser cooling water inlet temperature", fault_type: Some(Step), excluded: false },
    FaultInfo { fault: 6, description: "A feed loss (stream 1)", fault_type: Some(Step), excluded: false },
    FaultInfo { fault: 7, description: "C header pressure loss - reduced availability (stream 4)", fault_type: Some(Step), excluded: false },
    FaultInfo { fault: 8, description: "A, B, C feed composition (stream 4)", fault_type: Some(RandomVariation), excluded: false },
    FaultInfo { fault: 9, description: "D feed temperature (stream 2)", fault_type: Some(RandomVariation), excluded: true },
    FaultInfo { fault: 10, description: "C feed temperature (stream 4)", fault_type: Some(RandomVariation), excluded: false },
    FaultInfo { fault: 11, description: "Reactor cooling water inlet temperature", fault_type: Some(RandomVariation), excluded: false },
    FaultInfo { fault: 12, description: "Condenser cooling water inlet temperature", fault_type: Some(RandomVariation), excluded: false },
    FaultInfo { fault: 13, description: "Reaction kinetics", fault_type: Some(SlowDrift), excluded: false },
    FaultInfo { fault: 14, description: "Reactor cooling water valve", fault_type: Some(Sticking), excluded: false },
    FaultInfo { fault: 15, description: "Condenser cooling water valve", fault_type: Some(Sticking), excluded: true },
    FaultInfo { fault: 16, description: "Unknown", fault_type: Some(Unknown), excluded: false },
    FaultInfo { fault: 17, description: "Unknown", fault_type: Some(Unknown), excluded: false },
    FaultInfo { fault: 18, description: "Unknown", fault_type: Some(Unknown), excluded: false },
    FaultInfo { fault: 19, description: "Unknown", fault_type: Some(Unknown), excluded: false },
    FaultInfo { fault: 20, description: "Unknown", fault_type: Some(Unknown), excluded: false },
];

pub fn is_excluded(fault: u8) -> bool {
    matches!(fault, 3 | 9 | 15)
}

/// The 18 detection targets, ascending: 0 plus 17 non-excluded faults.
pub fn included_faults() -> Vec<u8> {
    CATALOG
        .iter()
        .filter(|f| !f.excluded)
        .map(|f| f.fault)
        .collect()
}

pub fn info(fault: u8) -> Option<&'static FaultInfo> {
    CATALOG.get(fault as usize)
}

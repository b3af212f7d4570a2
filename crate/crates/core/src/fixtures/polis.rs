//! Ontology-style records describing battery simulation workflows.

use serde_json::json;

use super::line;
use crate::repository::{FixtureLink, FixtureLine};

const RECORDS: &[(&str, &str, &str, &str)] = &[
    ("polis-ontology", "POLiS Ontology", "ontology", "Root record of the ontology for multiscale battery simulation and characterization workflows."),
    ("material", "Material", "class", "A substance with defined composition used as electrode, electrolyte or additive."),
    ("electrode", "Electrode", "class", "Porous electrode consisting of active material, binder and conductive additive."),
    ("electrolyte", "Electrolyte", "class", "Ion conducting phase between the electrodes, liquid or solid."),
    ("cathode-active-material", "CathodeActiveMaterial", "class", "Layered oxide such as NMC811 that hosts sodium or lithium ions."),
    ("anode-active-material", "AnodeActiveMaterial", "class", "Hard carbon or metal anode that stores ions during charging."),
    ("cell-assembly", "CellAssembly", "process", "Coin cell assembly in a glovebox with separator and electrolyte filling."),
    ("galvanostatic-cycling", "GalvanostaticCycling", "measurement", "Constant current cycling of a cell between voltage limits."),
    ("impedance-spectroscopy", "ImpedanceSpectroscopy", "measurement", "Frequency response of a cell used to separate transport processes."),
    ("molecular-dynamics-solver", "MolecularDynamicsSolver", "software", "Classical molecular dynamics engine for ion transport in electrolytes."),
    ("continuum-model", "ContinuumModel", "model", "Pseudo two dimensional Newman model of cell discharge."),
    ("simulation-workflow", "SimulationWorkflow", "process", "Chain of simulation steps from atomistic to continuum scale."),
    ("raw-measurement-result", "RawMeasurementResult", "result",
        "Raw output of a simulation run. Contains the simulation output files OUTCAR, OSZICAR and CONTCAR of the relaxation."),
    ("dft-solver", "DFT Solver", "software",
        "Plane-wave based density functional theory solver (VASP) used to compute formation energies and voltages of electrode materials."),
    ("formation-energy", "FormationEnergy", "property", "Energy released when a compound forms from its elements."),
    ("open-circuit-voltage", "OpenCircuitVoltage", "property", "Equilibrium voltage of a cell without current."),
    ("exchange-correlation-functional", "ExchangeCorrelationFunctional", "parameter", "Approximation such as PBE or SCAN used by a DFT calculation."),
    ("kinetic-monte-carlo", "KineticMonteCarlo", "software", "Stochastic simulation of diffusion events on a lattice."),
    ("experiment-protocol", "ExperimentProtocol", "document", "Written procedure describing sample preparation and measurement settings."),
    ("processed-result", "ProcessedResult", "result", "Curated values derived from raw measurement or simulation output."),
];

/// Twenty records; record 14 is the DFT solver and links to its raw results
/// in record 13.
pub fn polis() -> Vec<FixtureLine> {
    let mut lines: Vec<FixtureLine> = RECORDS
        .iter()
        .map(|(ident, title, kind, desc)| line(ident, title, desc, json!({ "type": format!("polis:{kind}"), "ontology": "POLiS" })))
        .collect();
    let mut link = |from: usize, to: &str, annotation: &str| {
        lines[from - 1].links.push(FixtureLink { to_identifier: to.into(), annotation: annotation.into() });
    };
    link(14, "raw-measurement-result", "produces");
    link(14, "exchange-correlation-functional", "uses");
    link(14, "formation-energy", "computes");
    link(13, "processed-result", "is processed into");
    link(12, "dft-solver", "has step");
    link(12, "continuum-model", "has step");
    link(10, "raw-measurement-result", "produces");
    link(8, "cell-assembly", "requires");
    link(3, "material", "consists of");
    link(5, "material", "is a");
    link(6, "material", "is a");
    link(4, "material", "is a");
    link(19, "galvanostatic-cycling", "describes");
    lines[13].extras.insert("code".into(), json!("VASP"));
    lines[13].extras.insert("basis".into(), json!("plane waves"));
    lines[12].extras.insert("files".into(), json!(["OUTCAR", "OSZICAR", "CONTCAR"]));
    lines
}

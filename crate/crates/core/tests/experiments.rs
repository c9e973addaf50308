use dmimo::config::SimulationConfig;
use dmimo::experiments::{
    build_tables, run_experiment, ExperimentSpec, OutputKind, Sweep, FIGURE_FAMILIES,
};
use dmimo::{Architecture, GroupingScheme, ScenarioConfig};

fn tiny() -> SimulationConfig {
    let mut sim = SimulationConfig {
        scenario: ScenarioConfig {
            num_aps: 6,
            num_ues: 6,
            num_pilots: 3,
            ..ScenarioConfig::desk()
        },
        ..SimulationConfig::default()
    };
    sim.mc.num_trials = 100;
    sim
}

fn sweep_values(sweep: Sweep) -> Vec<usize> {
    match sweep {
        Sweep::NumUes => vec![4, 8],
        Sweep::NumPilots => vec![2, 4],
        Sweep::Antennas => vec![4, 6],
        Sweep::None => Vec::new(),
    }
}

#[test]
fn every_figure_family_produces_its_table() {
    let sim = tiny();
    for fam in FIGURE_FAMILIES {
        let spec = ExperimentSpec {
            sweep: fam.sweep,
            sweep_values: sweep_values(fam.sweep),
            schemes: vec![GroupingScheme::GPfzf, GroupingScheme::ThresholdPfzf],
            architectures: fam.architectures.to_vec(),
            drops: 2,
            outputs: vec![fam.output],
            ..ExperimentSpec::default()
        };
        let tables = build_tables(&spec, &sim).unwrap();
        assert_eq!(tables.len(), 1, "{}", fam.name);
        let table = &tables[0];
        assert_eq!(table.kind, fam.output);
        assert!(!table.rows.is_empty(), "{} produced no rows", fam.name);
        if fam.sweep != Sweep::None {
            let col = table
                .columns
                .iter()
                .position(|c| c == "sweep_value")
                .unwrap();
            for v in sweep_values(fam.sweep) {
                assert!(
                    table
                        .rows
                        .iter()
                        .any(|r| r[col].to_string() == v.to_string()),
                    "{} misses sweep value {v}",
                    fam.name
                );
            }
        }
        if fam.output != OutputKind::Costs && fam.output != OutputKind::StrongPilotHistogram {
            let col = table
                .columns
                .iter()
                .position(|c| c == "architecture")
                .unwrap();
            for arch in fam.architectures {
                assert!(table.rows.iter().any(|r| r[col].to_string() == arch.name()));
            }
        }
    }
}

#[test]
fn figure_families_cover_every_data_output() {
    for kind in [
        OutputKind::SumSe,
        OutputKind::PerUserCdf,
        OutputKind::StrongPilotHistogram,
        OutputKind::Costs,
    ] {
        assert!(
            FIGURE_FAMILIES.iter().any(|f| f.output == kind),
            "{kind} unused"
        );
    }
    for sweep in [Sweep::NumUes, Sweep::NumPilots, Sweep::Antennas] {
        assert!(FIGURE_FAMILIES
            .iter()
            .any(|f| f.output == OutputKind::SumSe && f.sweep == sweep));
    }
    assert!(FIGURE_FAMILIES
        .iter()
        .any(|f| f.architectures.contains(&Architecture::Olsfd) && f.output == OutputKind::SumSe));
}

#[test]
fn cdf_reports_the_tenth_percentile() {
    let spec = ExperimentSpec {
        schemes: vec![GroupingScheme::AllMr],
        architectures: vec![Architecture::Uniform],
        drops: 3,
        outputs: vec![OutputKind::PerUserCdf],
        ..ExperimentSpec::default()
    };
    let t = &build_tables(&spec, &tiny()).unwrap()[0];
    let p10 = t.columns.iter().position(|c| c == "p10").unwrap();
    let likely = t.columns.iter().position(|c| c == "se_90_likely").unwrap();
    assert_eq!(t.rows[0][p10], t.rows[0][likely]);
    let samples = t.columns.iter().position(|c| c == "samples").unwrap();
    assert_eq!(t.rows[0][samples].to_string(), "18");
}

#[test]
fn failed_write_leaves_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    // a directory squatting on the JSON path makes the second write fail
    std::fs::create_dir(dir.path().join("costs.json")).unwrap();
    let spec = ExperimentSpec {
        outputs: vec![OutputKind::Costs],
        ..ExperimentSpec::default()
    };
    assert!(run_experiment(&spec, &tiny(), dir.path()).is_err());
    assert!(!dir.path().join("costs.csv").exists());
    assert!(dir.path().exists());
}

#[test]
fn invalid_spec_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fresh");
    let spec = ExperimentSpec {
        sweep: Sweep::Antennas,
        sweep_values: vec![1],
        ..ExperimentSpec::default()
    };
    assert!(run_experiment(&spec, &tiny(), &out).is_err());
    assert!(!out.exists());
}

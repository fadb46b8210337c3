mod common;

use std::fs;

use approx::assert_relative_eq;
use mcf_qkd::engine::{Mode, Scenario};
use mcf_qkd::fiber::{
    derive_intercore_spectrum, worst_case_raman_coefficient, RamanSpectrum, DEFAULT_RAYLEIGH_OFFSET_DB,
};
use mcf_qkd::io::{ingest_spectrum_csv, load_config, write_config, write_spectrum_csv};
use mcf_qkd::Error;

#[test]
fn shipped_spectrum_yields_default_coefficient() {
    let intra = ingest_spectrum_csv(common::manifest_dir().join("data/raman_intracore_default.csv")).unwrap();
    assert_eq!(intra, RamanSpectrum::builtin_intracore());
    let inter = derive_intercore_spectrum(&intra, DEFAULT_RAYLEIGH_OFFSET_DB).unwrap();
    assert_relative_eq!(
        worst_case_raman_coefficient(&inter).unwrap(),
        5.0e-16,
        max_relative = 1e-12
    );
}

#[test]
fn spectrum_file_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let meta = "# launch_dbm=0\n# length_km=53\n# direction=backward\nwavelength_nm,density_dbm_per_nm\n";
    let cases = [
        ("two.csv", format!("{meta}1500,-90\n1600,-85\n")),
        ("desc.csv", format!("{meta}1600,-85\n1500,-90\n")),
        ("one.csv", format!("{meta}1500,-90\n")),
        (
            "nometa.csv",
            "wavelength_nm,density_dbm_per_nm\n1500,-90\n1600,-85\n".to_string(),
        ),
    ];
    let mut results = Vec::new();
    for (name, body) in &cases {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        results.push(ingest_spectrum_csv(&p));
    }
    assert_eq!(results[0].as_ref().unwrap().samples().len(), 2);
    assert!(matches!(results[1], Err(Error::SpectrumNonMonotone { .. })));
    assert!(matches!(results[2], Err(Error::SpectrumTooShort(1))));
    assert!(matches!(results[3], Err(Error::SpectrumMissingMetadata(_))));
}

#[test]
fn written_spectrum_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    fs::write(&p, write_spectrum_csv(&RamanSpectrum::builtin_intracore())).unwrap();
    assert_eq!(ingest_spectrum_csv(&p).unwrap(), RamanSpectrum::builtin_intracore());
}

#[test]
fn config_files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.toml");
    let control = Scenario::default().dual_ssmf_control().unwrap();
    fs::write(&p, write_config(&control).unwrap()).unwrap();
    assert_eq!(load_config(&p).unwrap(), control);

    fs::write(&p, "").unwrap();
    assert_eq!(load_config(&p).unwrap(), Scenario::default());

    fs::write(&p, "mode = \"dual_ssmf_control\"\n[fiber]\nlength_km = 50\nattenuation_db_per_km = 0.2\nexcess_loss_db = 0\nfanout_tx_loss_db = 0\nfanout_rx_loss_db = 0\n").unwrap();
    let s = load_config(&p).unwrap();
    assert_eq!(s.mode, Mode::DualSsmfControl);
    assert_relative_eq!(s.fiber.attenuator_db, 3.5, epsilon = 1e-9);
    assert_relative_eq!(s.loss_budget().unwrap().total().value(), 14.1, epsilon = 1e-9);
}

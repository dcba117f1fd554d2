//! Resolving GN divisions through the administrative hierarchy.

use dengue_surveillance::case_registry::suggest;
use dengue_surveillance::fixtures;
use dengue_surveillance::gazetteer::{GazetteerError, Level};

fn main() {
    let g = fixtures::gazetteer();
    println!(
        "{} health districts, {} MOH areas, {} PHI areas",
        g.district_names().len(),
        g.moh_areas().len(),
        g.phi_areas().len()
    );

    let path = g.resolve("chundikul  north", None).expect("known division");
    println!(
        "Chundikul North -> PHI {} / MOH {} / {}",
        path.phi_area, path.moh_area, path.district
    );

    match g.resolve("Fort", None) {
        Err(GazetteerError::AmbiguousDivision { candidates, .. }) => {
            println!("Fort is ambiguous: {candidates:?}")
        }
        other => println!("unexpected: {other:?}"),
    }
    let galle = g.resolve("Fort", Some("Galle")).unwrap();
    println!("Fort with district hint Galle -> MOH {}", galle.moh_area);

    let vocab = fixtures::vocabularies();
    println!(
        "suggest(\"Chund\") = {:?}",
        suggest("gn_divisions", "Chund", 5, &g, &vocab).unwrap()
    );
    println!(
        "suggest(\"gov\") = {:?}",
        suggest("employment", "gov", 5, &g, &vocab).unwrap()
    );
    println!(
        "Jaffna PHI areas: {:?}",
        g.phi_areas()
            .iter()
            .filter(|p| p.district == "Jaffna")
            .map(|p| p.phi_area.as_str())
            .collect::<Vec<_>>()
    );
    println!("all levels: {} GN divisions", g.names(Level::Gn).len());
}

mod common;

/// Set PRIVDIST_BLESS=1 to regenerate the golden files.
#[test]
fn pipeline_matches_golden_files() {
    let bless = std::env::var_os("PRIVDIST_BLESS").is_some();
    let (compared, problems) = common::golden_round_trip(bless);
    assert!(problems.is_empty(), "{}", problems.join("\n"));
    assert!(bless || compared > 0);
}

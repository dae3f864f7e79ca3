mod common;

use common::fixtures;

#[test]
fn committed_fixtures_match_generators() {
    let dir = fixtures::dir();
    let regenerate = std::env::var_os("SNSPD_LINK_REGENERATE").is_some();
    if regenerate {
        std::fs::create_dir_all(&dir).unwrap();
    }
    for (name, contents) in fixtures::all() {
        let path = dir.join(name);
        if regenerate {
            std::fs::write(&path, &contents).unwrap();
        }
        let on_disk = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(on_disk, contents, "{name} differs from its generator");
    }
}

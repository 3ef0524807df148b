use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_drc");
const ROOT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");

fn scene(name: &str) -> String {
    format!("{ROOT}/scenes/{name}.scn")
}

fn fixture(name: &str) -> String {
    format!("{ROOT}/crates/core/tests/fixtures/{name}")
}

fn drc(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn pt_smoke_render_writes_pfm() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "a.pfm");
    let o = drc(&["render", "--scene", &scene("cornell"), "--mode", "pt", "--spp", "4", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = std::fs::read(&out).unwrap();
    assert!(bytes.starts_with(b"PF\n64 64\n-1"));
    assert_eq!(bytes.len(), "PF\n64 64\n-1.0\n".len() + 64 * 64 * 12);
    assert!(o.stdout.is_empty());
    assert!(stderr(&o).contains("pass 4/4"));
}

#[test]
fn drc_without_weights_is_a_usage_error() {
    let o = drc(&["render", "--scene", &scene("cornell"), "--mode", "drc", "--out", "/tmp/never.pfm"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--weights"));
}

#[test]
fn unknown_flags_and_extensions_are_usage_errors() {
    assert_eq!(drc(&["render", "--bogus"]).status.code(), Some(1));
    let o = drc(&["render", "--scene", &scene("cornell"), "--out", "/tmp/x.exr"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_scene_is_an_io_error() {
    let o = drc(&["render", "--scene", "/nonexistent/scene.scn", "--out", "/tmp/never.pfm"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/scene.scn"));
}

#[test]
fn invalid_scene_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let bad = path(&dir, "bad.scn");
    std::fs::write(&bad, "{ \"camera\": {} }").unwrap();
    let o = drc(&["render", "--scene", s(&bad), "--out", s(&path(&dir, "x.pfm"))]);
    assert_eq!(o.status.code(), Some(3));
    let o = drc(&["render", "--scene", &scene("cornell"), "--spp", "0", "--out", s(&path(&dir, "x.pfm"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn same_arguments_give_identical_pfm_for_any_thread_count() {
    let dir = TempDir::new().unwrap();
    let weights = path(&dir, "blur.drcw");
    let o = drc(&["make-weights", "--kind", "blur", "--k", "12", "--out", s(&weights)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "3", "1"].iter().enumerate() {
        let out = path(&dir, &format!("d{i}.pfm"));
        let o = drc(&[
            "render", "--scene", &scene("cornell"), "--mode", "drc", "--weights", s(&weights),
            "--direct-spp", "2", "--indirect-tasks", "2", "--seed", "5", "--threads", threads, "--out", s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stderr(&o).contains("r=8"));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn interrupt_matches_pass_limited_run() {
    let dir = TempDir::new().unwrap();
    let interrupted = path(&dir, "int.pfm");
    let args = ["render", "--scene", &scene("cornell"), "--mode", "pt", "--spp", "4096", "--seed", "3"];
    let mut child = Command::new(BIN)
        .args(args)
        .args(["--out", s(&interrupted)])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let mut log = Vec::new();
    for line in lines.by_ref() {
        let line = line.unwrap();
        let first_pass = line.starts_with("pass 1/");
        log.push(line);
        if first_pass {
            let status = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
            assert!(status.success());
            break;
        }
    }
    log.extend(lines.map(|l| l.unwrap()));
    assert!(child.wait().unwrap().success(), "{log:?}");
    let done: u32 = log
        .iter()
        .find_map(|l| l.strip_prefix("stopped after ")?.strip_suffix(" passes")?.parse().ok())
        .unwrap_or_else(|| panic!("no stop message in {log:?}"));
    assert!(done < 16);

    let clean = path(&dir, "clean.pfm");
    let o = drc(&[&args[..], &["--passes", &done.to_string(), "--out", s(&clean)]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&interrupted).unwrap(), std::fs::read(&clean).unwrap());
}

fn read_pfm_floats(p: &Path) -> Vec<f32> {
    let bytes = std::fs::read(p).unwrap();
    let mut newlines = 0;
    let start = bytes
        .iter()
        .position(|&b| {
            newlines += (b == b'\n') as u32;
            newlines == 3
        })
        .unwrap()
        + 1;
    bytes[start..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()
}

#[test]
fn infer_reproduces_golden_prediction() {
    let dir = TempDir::new().unwrap();
    let golden: Vec<f32> = std::fs::read(fixture("golden_outputs.f32"))
        .unwrap()
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    for index in 0..2 {
        let out = path(&dir, &format!("pred{index}.pfm"));
        let o = drc(&[
            "infer", "--weights", &fixture("golden_k8.drcw"), "--input", &fixture("golden_inputs.drcd"),
            "--index", &index.to_string(), "--out", s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let pfm = read_pfm_floats(&out);
        assert_eq!(pfm.len(), 3 * 1024);
        let want = &golden[index * 3072..(index + 1) * 3072];
        // PFM rows are bottom-up and interleaved; the golden is planar, top-down.
        for y in 0..32 {
            for x in 0..32 {
                for c in 0..3 {
                    let got = pfm[((31 - y) * 32 + x) * 3 + c];
                    assert!((got - want[c * 1024 + y * 32 + x]).abs() <= 1e-6);
                }
            }
        }
    }
    let o = drc(&[
        "infer", "--weights", &fixture("golden_k8.drcw"), "--input", &fixture("golden_inputs.drcd"),
        "--index", "9", "--out", s(&path(&dir, "x.pfm")),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn eval_prints_metrics_line() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a.pfm"), path(&dir, "b.pfm"));
    for (p, spp, seed) in [(&a, "64", "1"), (&b, "4", "2")] {
        let o = drc(&["render", "--scene", &scene("cornell"), "--spp", spp, "--seed", seed, "--out", s(p)]);
        assert!(o.status.success());
    }
    let o = drc(&["eval", "--ref", s(&a), "--test", s(&b)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let first = text.lines().next().unwrap();
    let keys: Vec<&str> = first.split(' ').map(|kv| kv.split('=').next().unwrap()).collect();
    assert_eq!(keys, ["l1", "ssim", "pngsize_ref", "pngsize_test"]);
    let ssim: f64 = first.split(' ').nth(1).unwrap()[5..].parse().unwrap();
    assert!(ssim > 0.0 && ssim < 1.0);

    let o = drc(&["eval", "--ref", s(&a), "--test", s(&a), "--metrics", "ssim"]);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("ssim=1.000000\n"));
    assert_eq!(drc(&["eval", "--ref", s(&a), "--test", s(&a), "--metrics", "psnr"]).status.code(), Some(1));
}

#[test]
fn dataset_and_cachedump_write_files() {
    let dir = TempDir::new().unwrap();
    let ds = path(&dir, "d.drcd");
    let o = drc(&["dataset", "--scene", &scene("cornell"), "--grid", "2x1", "--ref-spp", "256", "--out", s(&ds)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = std::fs::read(&ds).unwrap();
    assert_eq!(&bytes[..4], b"DRCD");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
    assert_eq!(drc(&["dataset", "--scene", &scene("cornell"), "--grid", "2by1", "--out", s(&ds)]).status.code(), Some(1));

    let weights = path(&dir, "w.drcw");
    assert!(drc(&["make-weights", "--kind", "blur", "--k", "12", "--out", s(&weights)]).status.success());
    let cache = path(&dir, "c.bin");
    let o = drc(&[
        "render", "--scene", &scene("cornell"), "--mode", "drc", "--weights", s(&weights), "--direct-spp", "1",
        "--indirect-tasks", "1", "--cache-out", s(&cache), "--out", s(&path(&dir, "i.png")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = drc(&["cachedump", "--in", s(&cache)]);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x,y,pass,px,py,pz,nx,ny,nz,r,g,b,tr,tg,tb");
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 16);
    assert!(rows.iter().all(|r| r.split(',').count() == 15));
    assert!(std::fs::read(path(&dir, "i.png")).unwrap().starts_with(b"\x89PNG"));
}

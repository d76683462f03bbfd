#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use serde_json::{json, Value};
use streetclear::study::{Dataset, ImagePair, StudyPlan, TargetBox};
use streetclear::{Raster, RgbImage};

pub const BIN: &str = env!("CARGO_BIN_EXE_streetclear");

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets/fixtures")
}

pub fn toy_weights() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets/toy_weights.json")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("STREETCLEAR_DATA_ROOT")
        .output()
        .expect("spawn streetclear")
}

/// A running `streetclear serve`, killed with SIGKILL on drop.
pub struct Server {
    pub child: Child,
    pub base: String,
}

impl Server {
    pub fn start(data_dir: &Path) -> Server {
        let mut child = Command::new(BIN)
            .args(["serve", "--addr", "127.0.0.1:0", "--data-dir"])
            .arg(data_dir)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn server");
        let stdout = child.stdout.take().expect("stdout");
        let mut line = String::new();
        BufReader::new(stdout).read_line(&mut line).expect("listening line");
        let v: Value = serde_json::from_str(&line).expect("listening json");
        let addr = v["listening"].as_str().expect("address").to_string();
        Server {
            child,
            base: format!("http://{addr}"),
        }
    }

    pub fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.kill();
    }
}

pub fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::new()
}

/// Two datasets × `pairs` image pairs, with real PNGs under `<data>/images`.
pub fn study_plan(data_dir: &Path, pairs: usize) -> StudyPlan {
    let images = data_dir.join("images");
    std::fs::create_dir_all(&images).unwrap();
    let img = RgbImage::filled(32, 24, [0.4, 0.5, 0.6]).unwrap();
    let datasets = ["Data_1", "Data_2"]
        .iter()
        .map(|name| Dataset {
            name: name.to_string(),
            pairs: (0..pairs)
                .map(|i| {
                    let (o, p) = (format!("{name}_{i}_o.png"), format!("{name}_{i}_p.png"));
                    std::fs::write(images.join(&o), img.to_png()).unwrap();
                    std::fs::write(images.join(&p), img.to_png()).unwrap();
                    ImagePair {
                        pair_id: format!("{name}-{i}"),
                        original: o,
                        inpainted: p,
                        width: 32,
                        height: 24,
                        target: TargetBox {
                            x: 4,
                            y: 4,
                            width: 8,
                            height: 8,
                        },
                        target_name: format!("shop {i}"),
                    }
                })
                .collect(),
        })
        .collect();
    StudyPlan::crossover("acceptance", 42, datasets)
}

/// Fetches the next trial, downloads its image, waits `think` and submits
/// a click. Returns the pair id, or `None` when the session is done.
pub fn do_trial(
    c: &reqwest::blocking::Client,
    s: &Server,
    session: &str,
    click: (f64, f64),
    think: std::time::Duration,
) -> Option<String> {
    let next: Value = c.get(s.url(&format!("/sessions/{session}/next"))).send().unwrap().json().unwrap();
    if next.get("done").is_some() {
        return None;
    }
    let img = c.get(s.url(next["image_url"].as_str().unwrap())).send().unwrap();
    assert!(img.status().is_success());
    std::thread::sleep(think);
    let pair = next["pair_id"].as_str().unwrap().to_string();
    let resp = c
        .post(s.url(&format!("/sessions/{session}/trials")))
        .json(&json!({
            "pair_id": pair,
            "started_token": next["started_token"],
            "click": {"x": click.0, "y": click.1},
        }))
        .send()
        .unwrap();
    assert_eq!(resp.status().as_u16(), 201, "{}", resp.text().unwrap_or_default());
    Some(pair)
}

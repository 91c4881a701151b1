//! Fixture paths, the frozen tiny checkpoint recipe and a multipart builder.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use healthcam_core::dataset::synthetic::{synthetic_sample, Scene};
use healthcam_core::model::{Checkpoint, ModelConfig, ModelGraph};
use healthcam_core::training::experiments::{
    synthetic_benchmark, train_on, BenchmarkConfig, BenchmarkData,
};
use healthcam_core::training::{AdamConfig, TrainConfig};
use healthcam_service::{AppState, Deployment, ServiceConfig};
use http_body_util::BodyExt;
use rand::SeedableRng;
use tower::ServiceExt;

pub const BOUNDARY: &str = "healthcam-test-boundary";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

pub fn read_fixture(name: &str) -> Vec<u8> {
    std::fs::read(fixture(name)).unwrap_or_else(|e| {
        panic!("missing fixture {name} ({e}); run the golden test with UPDATE_GOLDEN=all")
    })
}

pub fn update_mode() -> Option<String> {
    std::env::var("UPDATE_GOLDEN")
        .ok()
        .filter(|v| !v.is_empty() && v != "0")
}

/// 224x224 input, three 3x3 stages of 2 filters, 4 hidden units.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        conv_filters: [2, 2, 2],
        hidden_units: 4,
        ..ModelConfig::default()
    }
}

/// Short synthetic training run that produces the frozen checkpoint.
pub fn train_tiny_checkpoint() -> Checkpoint {
    let bench = BenchmarkConfig {
        samples: 400,
        image_size: 224,
        train_fraction: 0.8,
        model: tiny_config(),
        train: TrainConfig {
            epochs: 20,
            batch_size: 8,
            seed: 11,
            adam: AdamConfig {
                learning_rate: 3e-3,
                ..AdamConfig::default()
            },
        },
    };
    let data: BenchmarkData = synthetic_benchmark(&bench, 11).expect("synthetic data");
    let trained = train_on(&data, &bench.model, None, &bench.train).expect("training");
    eprintln!(
        "tiny checkpoint final test: {:?}",
        trained.report.final_test
    );
    Checkpoint::new(trained.model, data.scaler)
}

fn png_bytes(img: &image::RgbImage) -> Vec<u8> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .expect("png encode");
    out.into_inner()
}

/// Writes the checkpoint and every fixture image.
pub fn regenerate_fixtures() {
    let dir = fixtures();
    std::fs::create_dir_all(&dir).unwrap();
    train_tiny_checkpoint()
        .save(&dir.join("tiny.ckpt"))
        .unwrap();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let scene = Scene::random(&mut rng);
    std::fs::write(dir.join("clear.png"), png_bytes(&scene.render(224, 0.0))).unwrap();
    std::fs::write(dir.join("hazy.png"), png_bytes(&scene.render(224, 1.0))).unwrap();
    let mid = synthetic_sample(99, 0, 96);
    std::fs::write(dir.join("medium_96.png"), png_bytes(&mid.image)).unwrap();
    let mut jpeg = std::io::Cursor::new(Vec::new());
    image::DynamicImage::ImageRgb8(scene.render(64, 0.5))
        .write_to(&mut jpeg, image::ImageFormat::Jpeg)
        .unwrap();
    std::fs::write(dir.join("haze_half.jpg"), jpeg.into_inner()).unwrap();
    std::fs::write(
        dir.join("one_pixel.png"),
        png_bytes(&image::RgbImage::new(1, 1)),
    )
    .unwrap();
    std::fs::write(
        dir.join("not_an_image.txt"),
        b"these bytes are not an image\n",
    )
    .unwrap();
}

pub fn deployment() -> Deployment {
    Deployment::load(&fixture("tiny.ckpt")).expect("frozen checkpoint loads")
}

pub fn loaded_state() -> AppState {
    AppState::new(healthcam_core::recommendation::RuleTable::default_policy())
        .with_deployment(deployment())
}

pub fn empty_state() -> AppState {
    AppState::new(healthcam_core::recommendation::RuleTable::default_policy())
}

pub enum Part<'a> {
    File {
        name: &'a str,
        filename: &'a str,
        bytes: &'a [u8],
    },
    Text {
        name: &'a str,
        value: &'a str,
    },
}

pub fn multipart_body(parts: &[Part<'_>]) -> Vec<u8> {
    let mut body = Vec::new();
    for part in parts {
        body.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        match part {
            Part::File {
                name,
                filename,
                bytes,
            } => {
                body.extend_from_slice(
                    format!(
                        "Content-Disposition: form-data; name=\"{name}\"; filename=\"{filename}\"\r\nContent-Type: application/octet-stream\r\n\r\n"
                    )
                    .as_bytes(),
                );
                body.extend_from_slice(bytes);
            }
            Part::Text { name, value } => {
                body.extend_from_slice(
                    format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}")
                        .as_bytes(),
                );
            }
        }
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

pub fn multipart_request(path: &str, parts: &[Part<'_>]) -> Request<Body> {
    Request::post(path)
        .header(
            "content-type",
            format!("multipart/form-data; boundary={BOUNDARY}"),
        )
        .body(Body::from(multipart_body(parts)))
        .unwrap()
}

pub async fn send(state: AppState, request: Request<Body>) -> (StatusCode, serde_json::Value) {
    let app = healthcam_service::router(state, &ServiceConfig::default());
    let response = app.oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let json = serde_json::from_slice(&bytes)
        .unwrap_or_else(|_| panic!("non-JSON body: {}", String::from_utf8_lossy(&bytes)));
    (status, json)
}

/// Drops the wall-clock field so bodies compare exactly.
pub fn without_latency(mut body: serde_json::Value) -> serde_json::Value {
    if let Some(obj) = body.as_object_mut() {
        obj.remove("latency_ms");
    }
    body
}

pub fn model_graph_of(d: &Deployment) -> &ModelGraph<f32> {
    &d.checkpoint().model
}

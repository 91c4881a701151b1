use std::path::Path;

use anyhow::Context;
use healthcam_core::dataset::Parameter;
use healthcam_core::recommendation::{RuleSource, RuleTable, SymptomProfile};
use healthcam_service::{AppState, Deployment, PredictResponse, ServiceConfig};

use crate::args::{PredictArgs, ServeArgs};
use crate::run::usage;

fn rules(path: Option<&Path>) -> anyhow::Result<RuleTable> {
    match path {
        Some(p) => Ok(RuleTable::load(p)?),
        None => Ok(RuleTable::default_policy()),
    }
}

fn render_prediction(p: &PredictResponse) -> String {
    let mut out = format!(
        "AQI class: {} ({})\n",
        p.aqi_label,
        p.model.architecture.name()
    );
    for parameter in Parameter::ALL {
        out.push_str(&format!(
            "  {:<6} {:>10.3} {}\n",
            parameter.name(),
            p.pollutants.get(parameter),
            parameter.unit()
        ));
    }
    out
}

/// Runs the same code path as `POST /api/predict` and `POST /api/recommend`.
pub fn predict(args: &PredictArgs) -> anyhow::Result<()> {
    let rules = rules(args.rules.as_deref())?;
    let profile = match &args.symptoms {
        Some(s) => Some(SymptomProfile::parse(s).map_err(|e| usage(e.to_string()))?),
        None => None,
    };
    let deployment = Deployment::load(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let bytes =
        std::fs::read(&args.image).with_context(|| format!("reading {}", args.image.display()))?;

    match profile {
        None => {
            let response = deployment
                .predict_bytes(&bytes, &rules.aqi)
                .map_err(|e| anyhow::anyhow!("{}: {}", args.image.display(), e.body.message))?;
            if args.json {
                println!("{}", serde_json::to_string(&response)?);
            } else {
                print!("{}", render_prediction(&response));
            }
        }
        Some(profile) => {
            let response = deployment
                .recommend_bytes(&bytes, &profile, &rules)
                .map_err(|e| anyhow::anyhow!("{}: {}", args.image.display(), e.body.message))?;
            if args.json {
                println!("{}", serde_json::to_string(&response)?);
            } else {
                print!("{}", render_prediction(&response.prediction));
                println!(
                    "verdict for {}: {}",
                    response.symptoms,
                    response.recommendation.verdict.key()
                );
                for t in &response.recommendation.triggered {
                    let source = match t.source {
                        RuleSource::General => "general".to_owned(),
                        RuleSource::Symptom(s) => s.name().to_owned(),
                    };
                    println!(
                        "  {source}: {} {:.3} > {:.3} -> {}",
                        t.pollutant.name(),
                        t.value,
                        t.threshold,
                        t.severity.key()
                    );
                }
            }
        }
    }
    Ok(())
}

pub fn serve(args: &ServeArgs) -> anyhow::Result<()> {
    let rules = rules(args.rules.as_deref())?;
    let state = AppState::new(rules);
    match &args.checkpoint {
        Some(path) => match Deployment::load(path) {
            Ok(d) => {
                tracing::info!("loaded checkpoint {} ({})", path.display(), d.sha256());
                state.install(d);
            }
            Err(e) if args.allow_degraded => {
                tracing::warn!("starting degraded: {e}");
            }
            Err(e) => {
                return Err(anyhow::Error::new(e).context(format!(
                    "loading checkpoint {} (pass --allow-degraded to start without one)",
                    path.display()
                )))
            }
        },
        None if args.allow_degraded => tracing::warn!("starting degraded: no checkpoint given"),
        None => {
            return Err(usage(
                "no checkpoint given; pass --checkpoint, set HEALTHCAM_CHECKPOINT, or use --allow-degraded",
            ))
        }
    }
    let config = ServiceConfig {
        body_limit: args.body_limit,
        cors_origins: args.cors_origins.clone(),
    };

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.addr)
            .await
            .with_context(|| format!("binding {}", args.addr))?;
        let addr = listener.local_addr()?;
        tracing::info!("listening on http://{addr}");
        eprintln!("listening on http://{addr}");
        spawn_reload_on_hangup(state.clone(), args.checkpoint.clone());
        healthcam_service::serve(listener, state, &config, shutdown_signal()).await?;
        tracing::info!("shut down");
        Ok(())
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        () = ctrl_c => {},
        () = term => {},
    }
}

/// SIGHUP re-reads the checkpoint path; a failed reload keeps the old model.
#[cfg(unix)]
fn spawn_reload_on_hangup(state: AppState, path: Option<std::path::PathBuf>) {
    use tokio::signal::unix::{signal, SignalKind};
    let Some(path) = path else { return };
    let Ok(mut hangup) = signal(SignalKind::hangup()) else {
        tracing::warn!("SIGHUP reload unavailable");
        return;
    };
    tokio::spawn(async move {
        while hangup.recv().await.is_some() {
            let state = state.clone();
            let path = path.clone();
            let result = tokio::task::spawn_blocking(move || state.reload(&path)).await;
            match result {
                Ok(Ok(hash)) => tracing::info!("reloaded checkpoint ({hash})"),
                Ok(Err(e)) => tracing::error!("reload failed, keeping current checkpoint: {e}"),
                Err(e) => tracing::error!("reload task failed: {e}"),
            }
        }
    });
}

#[cfg(not(unix))]
fn spawn_reload_on_hangup(_state: AppState, _path: Option<std::path::PathBuf>) {}

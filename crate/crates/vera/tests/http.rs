use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use vera::api::{router, AppState};
use vera::error::{ApiError, ErrorCode};
use vera_core::calibration::{FitConfig, ObservationSeries};
use vera_core::engine::{run_ode, simulate, EngineKind, RunConfig};
use vera_core::fixtures::{self, LotkaVolterra};
use vera_core::model::{Relation, RelationKind};
use vera_core::{compile, recommend_parameters, FitResult, Library, StoredModel, TimeSeries, TraitStore};

const TRAITS: &str = "\
species_id,common_name,lifespan_years,body_mass_g,offspring_count,reproductive_maturity_years
pueraria_montana,Kudzu,20,5,40,2
carpinus_caroliniana,American hornbeam,150,500,300,30
megacopta_cribraria,Kudzu bug,0.5,0.0001,200,0.1
";

fn app() -> (Router, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let mut traits = TraitStore::new();
    traits.ingest_traits(TRAITS.as_bytes()).unwrap();
    let state = AppState::new(Library::open(dir.path()).unwrap(), traits);
    (router(state), dir)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&b).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn raw(app: &Router, method: Method, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn post_model(app: &Router, model: &vera_core::ConceptualModel) -> StoredModel {
    let (status, body) = call(app, Method::POST, "/models?tags=demo,test", Some(json!(model))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    serde_json::from_value(body).unwrap()
}

#[tokio::test]
async fn health_and_unknown_routes() {
    let (app, _dir) = app();
    assert_eq!(
        call(&app, Method::GET, "/health", None).await,
        (StatusCode::OK, json!({"status": "ok"}))
    );
    let (status, body) = call(&app, Method::GET, "/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not_found");
    let (status, _) = call(&app, Method::DELETE, "/health", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn model_crud_round_trip() {
    let (app, _dir) = app();
    let model = fixtures::kudzu(0.001);
    let stored = post_model(&app, &model).await;
    assert_eq!(stored.model, model);
    assert_eq!(stored.tags, vec!["demo", "test"]);

    let (status, body) = call(&app, Method::GET, "/models/kudzu", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_value::<StoredModel>(body).unwrap(), stored);

    let (status, body) = call(&app, Method::GET, "/models?filter=demo", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body.as_array().unwrap().len(), 1);
    assert_eq!(body[0]["complexity"]["total"], 5);

    // Creating the same id twice is refused.
    let (status, body) = call(&app, Method::POST, "/models", Some(json!(model))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");

    let mut edited = model.clone();
    edited.description = "with a fungus".into();
    let (status, body) = call(&app, Method::PUT, "/models/kudzu", Some(json!(edited))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let updated: StoredModel = serde_json::from_value(body).unwrap();
    assert_eq!(updated.model.description, "with a fungus");
    assert_eq!(updated.created_at, stored.created_at);
    assert!(updated.revised_at > stored.revised_at);

    let (status, body) = call(
        &app,
        Method::POST,
        "/models/kudzu/copy",
        Some(json!({"name": "Kudzu v2"})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let copy: StoredModel = serde_json::from_value(body).unwrap();
    assert_eq!(copy.lineage.as_deref(), Some("kudzu"));
    assert_eq!(copy.model.name, "Kudzu v2");
    let mut renamed = edited.clone();
    renamed.name = "Kudzu v2".into();
    assert!(copy.model.structurally_eq(&renamed));

    let (status, body) = call(&app, Method::GET, "/models/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not_found");
}

#[tokio::test]
async fn invalid_models_are_rejected_with_422() {
    let (app, _dir) = app();
    let mut model = fixtures::kudzu(0.001);
    model
        .relations
        .push(Relation::new("kudzu", RelationKind::Enhances, "ghost"));
    let (status, body) = call(&app, Method::POST, "/models", Some(json!(model))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let err: ApiError = serde_json::from_value(body).unwrap();
    assert_eq!(err.code, ErrorCode::ValidationFailed);
    assert!(!err.details["violations"].as_array().unwrap().is_empty());

    let (status, body) = raw(&app, Method::POST, "/models", "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad_request");

    let mut extra = json!(fixtures::kudzu(0.001));
    extra["colour"] = json!("green");
    let (status, _) = call(&app, Method::POST, "/models", Some(extra)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn validate_and_compile_match_core() {
    let (app, _dir) = app();
    let model = fixtures::predator_prey(LotkaVolterra::default());
    let stored = post_model(&app, &model).await;
    let id = &stored.model.id;

    let (status, body) = call(&app, Method::POST, &format!("/models/{id}/validate"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!(vera_core::validate_model(&model)));

    let (status, body) = call(&app, Method::POST, &format!("/models/{id}/compile"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!(compile(&model).unwrap()));
}

#[tokio::test]
async fn compile_fills_missing_rates_from_traits() {
    let (app, _dir) = app();
    let mut model = fixtures::kudzu(0.001);
    let p = model.entity_params.get_mut("kudzu").unwrap();
    p.birth_rate = None;
    p.death_rate = None;
    post_model(&app, &model).await;
    let (status, body) = call(&app, Method::POST, "/models/kudzu/compile", None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let birth = body["spec"]["reactions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["label"] == "birth:kudzu")
        .unwrap();
    // 40 offspring over (20 - 2) years.
    assert!((birth["propensity"]["rate"].as_f64().unwrap() - 40.0 / 18.0).abs() < 1e-12);
    // Values already present are not overwritten.
    let hornbeam = body["spec"]["reactions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["label"] == "death:hornbeam")
        .unwrap();
    assert_eq!(hornbeam["propensity"]["rate"], 0.02);
}

#[tokio::test]
async fn simulate_matches_module_output_exactly() {
    let (app, _dir) = app();
    let model = fixtures::kudzu(0.001);
    post_model(&app, &model).await;
    let spec = compile(&model).unwrap().spec;
    let cfg = RunConfig::new(20.0, 0.01).with_seed(2019).with_stride(50);

    for (engine, runs) in [("stochastic", 1), ("ode", 1), ("stochastic", 8)] {
        let req =
            json!({"duration": 20.0, "dt": 0.01, "seed": 2019, "record_every": 50, "engine": engine, "runs": runs});
        let (status, body) = call(&app, Method::POST, "/models/kudzu/simulate", Some(req)).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        let kind = if engine == "ode" {
            EngineKind::Ode
        } else {
            EngineKind::Stochastic
        };
        let expected = simulate(&spec, &cfg, kind, runs).unwrap();
        let got: TimeSeries = serde_json::from_value(body.clone()).unwrap();
        assert_eq!(got, expected);
        assert_eq!(body, json!(expected));
    }
}

#[tokio::test]
async fn simulate_is_deterministic_and_isolated_under_concurrency() {
    let (app, _dir) = app();
    post_model(&app, &fixtures::predator_prey(LotkaVolterra::default())).await;
    let req = |seed: u64| json!({"duration": 5.0, "dt": 0.01, "seed": seed, "record_every": 10});
    let mut handles = Vec::new();
    for i in 0..8u64 {
        let app = app.clone();
        let body = req(i % 2);
        handles.push(tokio::spawn(async move {
            call(&app, Method::POST, "/models/predator-prey/simulate", Some(body)).await
        }));
    }
    let mut results = Vec::new();
    for h in handles {
        let (status, body) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK, "{body}");
        results.push(body);
    }
    for (i, r) in results.iter().enumerate() {
        assert_eq!(r, &results[i % 2]);
    }
    assert_ne!(results[0], results[1]);
}

#[tokio::test]
async fn simulate_rejects_bad_configs() {
    let (app, _dir) = app();
    post_model(&app, &fixtures::exponential(100.0, 0.1, 0.0)).await;
    let id = "exponential";
    for bad in [
        json!({"duration": 10.0, "dt": 0.0}),
        json!({"duration": -1.0, "dt": 0.1}),
        json!({"duration": 1.0, "dt": 0.1, "record_every": 0}),
        json!({"duration": 1.0, "dt": 0.1, "engine": "gillespie"}),
        json!({"duration": 1.0, "dt": 0.1, "warp": true}),
    ] {
        let (status, body) = call(&app, Method::POST, &format!("/models/{id}/simulate"), Some(bad.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad} -> {body}");
    }
    let (status, _) = call(
        &app,
        Method::POST,
        "/models/nope/simulate",
        Some(json!({"duration": 1.0, "dt": 0.1})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn run_timeout_reports_engine_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut state = AppState::new(Library::open(dir.path()).unwrap(), TraitStore::new());
    state.run_timeout = std::time::Duration::from_millis(1);
    let app = router(state);
    post_model(&app, &fixtures::predator_prey(LotkaVolterra::default())).await;
    let req = json!({"duration": 20.0, "dt": 0.001, "runs": 16});
    let (status, body) = call(&app, Method::POST, "/models/predator-prey/simulate", Some(req)).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(body["code"], "engine_error");
}

#[tokio::test]
async fn fit_matches_module_output() {
    let (app, _dir) = app();
    let truth = fixtures::exponential(100.0, 0.3, 0.0);
    let start = fixtures::exponential(100.0, 0.1, 0.0);
    post_model(&app, &start).await;

    let ts = run_ode(
        &compile(&truth).unwrap().spec,
        &RunConfig::new(5.0, 0.01).with_stride(100),
    )
    .unwrap();
    let mut csv = String::from("time,entity_id,population\n");
    for (t, n) in ts.times.iter().zip(&ts.series["rabbit"]) {
        csv.push_str(&format!("{t},rabbit,{n}\n"));
    }
    let (status, obs) = raw(&app, Method::POST, "/observations/parse?name=field", &csv).await;
    assert_eq!(status, StatusCode::OK, "{obs}");
    let series: ObservationSeries = serde_json::from_value(obs.clone()).unwrap();
    assert_eq!(series.provenance, "field");
    assert_eq!(series.times, ts.times);

    let req = json!({"observations": obs, "free": ["birth_rate@rabbit"], "budget": 100});
    let (status, body) = call(&app, Method::POST, "/models/exponential/fit", Some(req)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let got: FitResult = serde_json::from_value(body).unwrap();
    let free = ["birth_rate@rabbit".parse().unwrap()];
    let expected = recommend_parameters(&start, &series, &free, &FitConfig::with_budget(100)).unwrap();
    assert_eq!(got, expected);
    assert!((got.best_params["birth_rate@rabbit"] - 0.3).abs() < 0.006);

    // The stored model is left alone; adopting the fit is a separate PUT.
    let (_, stored) = call(&app, Method::GET, "/models/exponential", None).await;
    assert_eq!(stored["model"], json!(start));

    let (status, body) = raw(&app, Method::POST, "/observations/parse", "when,who,how_many\n1,a,2\n").await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    let bad = json!({"observations": obs, "free": ["birth_rate@ghost"], "budget": 10});
    let (status, _) = call(&app, Method::POST, "/models/exponential/fit", Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn species_lookup() {
    let (app, _dir) = app();
    let (status, body) = call(&app, Method::GET, "/species?q=kudzu", None).await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = body
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["species_id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["pueraria_montana", "megacopta_cribraria"]);
    let (_, body) = call(&app, Method::GET, "/species?q=carpinus_caroliniana", None).await;
    assert_eq!(body[0]["common_name"], "American hornbeam");
    let (_, body) = call(&app, Method::GET, "/species?q=zebra", None).await;
    assert_eq!(body, json!([]));
}

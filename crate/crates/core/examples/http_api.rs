//! The JSON API, called in-process. Pass `--serve ADDR` to expose it over
//! HTTP instead, e.g. `--serve 127.0.0.1:8080`.

use std::sync::Arc;

use dengue_surveillance::alerting::MemoryTransport;
use dengue_surveillance::api::{handle, ApiRequest};
use dengue_surveillance::fixtures::{self, ICN, MOH_JAFFNA, PHI_GURUNAGAR, PHI_NALLUR};
use dengue_surveillance::{ManualClock, Surveillance};
use serde_json::json;

fn main() {
    let clock = ManualClock::new(fixtures::registered_at());
    let svc = Surveillance::in_memory(
        fixtures::context(),
        Box::new(MemoryTransport::new()),
        Arc::new(clock),
    );

    let args: Vec<String> = std::env::args().collect();
    if let Some(i) = args.iter().position(|a| a == "--serve") {
        let addr = args
            .get(i + 1)
            .cloned()
            .unwrap_or_else(|| "127.0.0.1:8080".into());
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(dengue_surveillance::http::serve(
            Arc::new(svc),
            &addr,
            std::time::Duration::from_secs(30),
        ))
        .unwrap();
        return;
    }

    let show = |req: ApiRequest| {
        let label = format!(
            "{:?} {} as {}",
            req.method,
            req.path,
            req.officer.as_deref().unwrap_or("public")
        );
        let res = handle(&svc, &req);
        println!("{label}\n  {} {}\n", res.status, res.body);
    };
    show(ApiRequest::post("/v1/cases", fixtures::sample_intake()).as_officer(ICN));
    show(ApiRequest::post("/v1/cases", fixtures::sample_intake()).as_officer(PHI_GURUNAGAR));
    show(ApiRequest::get("/v1/suggest?target=gn_divisions&prefix=Nall").as_officer(ICN));
    show(ApiRequest::get("/v1/cases/C000001").as_officer(PHI_NALLUR));
    show(ApiRequest::get("/v1/worklist").as_officer(PHI_GURUNAGAR));
    show(
        ApiRequest::post(
            "/v1/work-orders/W000001/attend",
            json!({"outcome": "confirmed"}),
        )
        .as_officer(PHI_GURUNAGAR),
    );
    show(
        ApiRequest::get("/v1/weekly-return?district=Jaffna&moh_area=Jaffna&week=2014-W01")
            .as_officer(MOH_JAFFNA),
    );
    show(ApiRequest::get("/v1/live-update?at=2013-12-31T17:07:08Z"));
    show(ApiRequest::get("/v1/cases"));
}

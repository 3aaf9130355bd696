//! Built-in topologies shaped after three microservice benchmark
//! applications, plus the canary scenario. Latency parameters are
//! reconstructions, not measurements.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use super::{
    AnomalySpec, CallMode, CallSpec, DelaySpec, LogNormalSpec, OperationSpec, TopologySpec,
};
use crate::trace_model::SpanIdentity;

pub const PRESETS: [&str; 4] = ["socialnet-like", "trainticket-like", "media-like", "canary"];

/// Default injected delay: Normal(5 ms, 1 ms) with probability 0.5.
pub const FAULT_DELAY: DelaySpec = DelaySpec {
    mu_us: 5_000.0,
    sigma_us: 1_000.0,
};
pub const FAULT_PROBABILITY: f64 = 0.5;

/// Canary build: half the requests, +3.7 ms (sd 1 ms) on the unique-id service.
pub const CANARY_SERVICE: &str = "unique-id-service";
pub const CANARY_FRACTION: f64 = 0.5;
pub const CANARY_DELAY: DelaySpec = DelaySpec {
    mu_us: 3_700.0,
    sigma_us: 1_000.0,
};

fn ident(s: &str) -> SpanIdentity {
    let (svc, op) = s.split_once('/').expect("service/operation");
    SpanIdentity::new(svc, op, "").expect("non-empty")
}

/// `(identity, mean µs, sd µs, calls)`; calls are `s:svc/op` (sequential) or
/// `p:svc/op` (parallel), whitespace separated.
type Row<'a> = (&'a str, f64, f64, &'a str);

fn build(name: &str, rows: &[Row]) -> TopologySpec {
    let operations = rows
        .iter()
        .map(|&(id, mean, sd, calls)| OperationSpec {
            identity: ident(id),
            base_latency: LogNormalSpec::from_mean_std(mean, sd),
            children: calls
                .split_whitespace()
                .map(|c| {
                    let (mode, callee) = c.split_once(':').expect("mode:callee");
                    CallSpec {
                        callee: ident(callee),
                        mode: if mode == "p" {
                            CallMode::Parallel
                        } else {
                            CallMode::Sequential
                        },
                    }
                })
                .collect(),
            tags: BTreeMap::new(),
            random_tags: BTreeMap::new(),
        })
        .collect();
    TopologySpec {
        name: name.into(),
        root: ident(rows[0].0),
        operations,
    }
}

/// 36 identities, wide parallel fan-out, one noisy storage hotspot.
pub fn socialnet_like() -> TopologySpec {
    build(
        "socialnet-like",
        &[
            ("nginx-web-server/ComposePost", 400.0, 120.0, "s:nginx-web-server/Authenticate s:compose-post-service/ComposePost"),
            ("nginx-web-server/Authenticate", 150.0, 90.0, "s:user-memcached/get_login s:user-mongodb/find_user"),
            ("user-memcached/get_login", 120.0, 110.0, ""),
            ("user-mongodb/find_user", 900.0, 450.0, ""),
            (
                "compose-post-service/ComposePost",
                300.0,
                130.0,
                "p:unique-id-service/UploadUniqueId p:text-service/UploadText p:media-service/UploadMedia p:compose-post-service/UploadCreator s:compose-post-redis/hget_all s:post-storage-service/StorePost p:user-timeline-service/WriteUserTimeline p:rabbitmq/publish",
            ),
            ("unique-id-service/UploadUniqueId", 80.0, 100.0, ""),
            ("text-service/UploadText", 250.0, 140.0, "p:url-shorten-service/UploadUrls p:user-mention-service/UploadUserMentions s:compose-post-redis/hset_text"),
            ("url-shorten-service/UploadUrls", 200.0, 120.0, "s:url-shorten-mongodb/insert s:compose-post-redis/hset_urls"),
            ("url-shorten-mongodb/insert", 800.0, 400.0, ""),
            ("compose-post-redis/hset_urls", 90.0, 100.0, ""),
            (
                "user-mention-service/UploadUserMentions",
                180.0,
                150.0,
                "s:user-memcached/get_mentions s:user-mongodb/find_mentions s:compose-post-redis/hset_mentions",
            ),
            ("user-memcached/get_mentions", 110.0, 105.0, ""),
            ("user-mongodb/find_mentions", 700.0, 160.0, ""),
            ("compose-post-redis/hset_mentions", 90.0, 95.0, ""),
            ("compose-post-redis/hset_text", 90.0, 100.0, ""),
            ("media-service/UploadMedia", 220.0, 135.0, "s:media-frontend/upload s:compose-post-redis/hset_media"),
            ("media-frontend/upload", 600.0, 170.0, "s:media-mongodb/insert"),
            ("media-mongodb/insert", 850.0, 350.0, ""),
            ("compose-post-redis/hset_media", 90.0, 110.0, ""),
            ("compose-post-service/UploadCreator", 150.0, 125.0, "s:user-service/UploadUserWithUserId s:compose-post-redis/hset_creator"),
            ("user-service/UploadUserWithUserId", 200.0, 140.0, ""),
            ("compose-post-redis/hset_creator", 90.0, 100.0, ""),
            ("compose-post-redis/hget_all", 120.0, 115.0, ""),
            ("post-storage-service/StorePost", 250.0, 150.0, "s:post-storage-mongodb/insert s:post-storage-memcached/set"),
            ("post-storage-mongodb/insert", 4_000.0, 1_225.0, ""),
            ("post-storage-memcached/set", 110.0, 105.0, ""),
            ("user-timeline-service/WriteUserTimeline", 200.0, 130.0, "p:user-timeline-mongodb/update p:user-timeline-redis/zadd"),
            ("user-timeline-mongodb/update", 750.0, 180.0, ""),
            ("user-timeline-redis/zadd", 100.0, 100.0, ""),
            ("rabbitmq/publish", 150.0, 120.0, "s:write-home-timeline-service/FanoutHomeTimelines"),
            (
                "write-home-timeline-service/FanoutHomeTimelines",
                250.0,
                145.0,
                "s:social-graph-service/GetFollowers p:home-timeline-redis/zadd_batch p:home-timeline-redis/expire",
            ),
            ("social-graph-service/GetFollowers", 200.0, 130.0, "s:social-graph-redis/zrange s:social-graph-mongodb/find"),
            ("social-graph-redis/zrange", 120.0, 110.0, ""),
            ("social-graph-mongodb/find", 1_000.0, 500.0, ""),
            ("home-timeline-redis/zadd_batch", 300.0, 150.0, ""),
            ("home-timeline-redis/expire", 80.0, 90.0, ""),
        ],
    )
}

/// 41 identities, long sequential chains; several services are called from
/// more than one place, so their identities repeat within a trace.
pub fn trainticket_like() -> TopologySpec {
    build(
        "trainticket-like",
        &[
            ("ts-ui-dashboard/preserve", 300.0, 120.0, "s:ts-auth-service/verifyToken s:ts-preserve-service/preserve"),
            ("ts-auth-service/verifyToken", 200.0, 110.0, "s:ts-auth-mongo/findUser"),
            ("ts-auth-mongo/findUser", 500.0, 150.0, ""),
            (
                "ts-preserve-service/preserve",
                400.0,
                160.0,
                "s:ts-security-service/check s:ts-contacts-service/getContactsById s:ts-travel-service/getTripAllDetailInfo s:ts-ticketinfo-service/queryForStationId s:ts-seat-service/distributeSeat s:ts-order-service/create s:ts-assurance-service/create s:ts-food-service/createFoodOrder s:ts-consign-service/insertConsign s:ts-user-service/findById s:ts-notification-service/preserveSuccess",
            ),
            ("ts-security-service/check", 250.0, 120.0, "s:ts-security-mongo/findAll s:ts-order-service/getOrderInfoForSecurity s:ts-order-other-service/getOrderInfoForSecurity"),
            ("ts-security-mongo/findAll", 450.0, 140.0, ""),
            ("ts-order-service/getOrderInfoForSecurity", 300.0, 130.0, "s:ts-order-mongo/find"),
            ("ts-order-other-service/getOrderInfoForSecurity", 300.0, 130.0, "s:ts-order-other-mongo/find"),
            ("ts-order-mongo/find", 600.0, 170.0, ""),
            ("ts-order-other-mongo/find", 600.0, 170.0, ""),
            ("ts-contacts-service/getContactsById", 200.0, 100.0, "s:ts-contacts-mongo/findById"),
            ("ts-contacts-mongo/findById", 450.0, 140.0, ""),
            (
                "ts-travel-service/getTripAllDetailInfo",
                300.0,
                130.0,
                "s:ts-travel-mongo/findByTripId s:ts-basic-service/queryForTravel s:ts-seat-service/getLeftTicketOfInterval",
            ),
            ("ts-travel-mongo/findByTripId", 500.0, 150.0, ""),
            (
                "ts-basic-service/queryForTravel",
                250.0,
                120.0,
                "s:ts-station-service/queryForId s:ts-station-service/queryForId s:ts-train-service/retrieve s:ts-route-service/getRouteById s:ts-price-service/query",
            ),
            ("ts-station-service/queryForId", 150.0, 100.0, "s:ts-station-mongo/findByName"),
            ("ts-station-mongo/findByName", 350.0, 130.0, ""),
            ("ts-train-service/retrieve", 200.0, 110.0, "s:ts-train-mongo/findById"),
            ("ts-train-mongo/findById", 400.0, 140.0, ""),
            ("ts-route-service/getRouteById", 200.0, 110.0, "s:ts-route-mongo/findById"),
            ("ts-route-mongo/findById", 400.0, 140.0, ""),
            ("ts-price-service/query", 200.0, 110.0, "s:ts-price-mongo/findByRouteIdAndTrainType"),
            ("ts-price-mongo/findByRouteIdAndTrainType", 400.0, 140.0, ""),
            (
                "ts-seat-service/getLeftTicketOfInterval",
                300.0,
                130.0,
                "s:ts-config-service/query s:ts-order-service/getTicketListByDateAndTripId s:ts-route-service/getRouteById",
            ),
            ("ts-config-service/query", 150.0, 100.0, "s:ts-config-mongo/findByName"),
            ("ts-config-mongo/findByName", 300.0, 120.0, ""),
            ("ts-order-service/getTicketListByDateAndTripId", 300.0, 130.0, "s:ts-order-mongo/find"),
            ("ts-ticketinfo-service/queryForStationId", 150.0, 100.0, "s:ts-basic-service/queryForStationId"),
            ("ts-basic-service/queryForStationId", 150.0, 100.0, "s:ts-station-service/queryForId"),
            ("ts-seat-service/distributeSeat", 300.0, 130.0, "s:ts-config-service/query s:ts-order-service/getTicketListByDateAndTripId"),
            ("ts-order-service/create", 350.0, 140.0, "s:ts-order-mongo/save"),
            ("ts-order-mongo/save", 2_500.0, 1_200.0, ""),
            ("ts-assurance-service/create", 200.0, 110.0, "s:ts-assurance-mongo/save"),
            ("ts-assurance-mongo/save", 450.0, 140.0, ""),
            ("ts-food-service/createFoodOrder", 200.0, 110.0, "s:ts-food-mongo/save"),
            ("ts-food-mongo/save", 450.0, 140.0, ""),
            ("ts-consign-service/insertConsign", 200.0, 110.0, "s:ts-consign-price-service/getPrice s:ts-consign-mongo/save"),
            ("ts-consign-price-service/getPrice", 150.0, 100.0, ""),
            ("ts-consign-mongo/save", 450.0, 140.0, ""),
            ("ts-user-service/findById", 200.0, 110.0, ""),
            ("ts-notification-service/preserveSuccess", 300.0, 130.0, ""),
        ],
    )
}

/// 38 identities; review composition with per-field upload stages.
pub fn media_like() -> TopologySpec {
    build(
        "media-like",
        &[
            (
                "nginx-web-server/ComposeReview",
                400.0,
                120.0,
                "s:unique-id-service/UploadUniqueId p:user-service/UploadUserWithUsername p:movie-id-service/UploadMovieId p:text-service/UploadText p:rating-service/UploadRating s:compose-review-service/UploadReview",
            ),
            ("unique-id-service/UploadUniqueId", 150.0, 60.0, "s:compose-review-service/UploadUniqueId"),
            ("compose-review-service/UploadUniqueId", 150.0, 70.0, "s:compose-review-memcached/set_unique_id"),
            ("compose-review-memcached/set_unique_id", 100.0, 50.0, ""),
            ("user-service/UploadUserWithUsername", 200.0, 90.0, "s:user-memcached/get_user s:user-mongodb/find_user s:compose-review-service/UploadUserId"),
            ("user-memcached/get_user", 100.0, 50.0, ""),
            ("user-mongodb/find_user", 700.0, 300.0, ""),
            ("compose-review-service/UploadUserId", 150.0, 70.0, "s:compose-review-memcached/set_user_id"),
            ("compose-review-memcached/set_user_id", 100.0, 50.0, ""),
            ("movie-id-service/UploadMovieId", 200.0, 90.0, "s:movie-id-memcached/get s:movie-id-mongodb/find p:compose-review-service/UploadMovieId p:rating-service/UploadRating2"),
            ("movie-id-memcached/get", 100.0, 50.0, ""),
            ("movie-id-mongodb/find", 800.0, 250.0, ""),
            ("compose-review-service/UploadMovieId", 150.0, 70.0, "s:compose-review-memcached/set_movie_id"),
            ("compose-review-memcached/set_movie_id", 100.0, 50.0, ""),
            ("rating-service/UploadRating2", 150.0, 70.0, "s:rating-redis/incr"),
            ("rating-redis/incr", 100.0, 50.0, ""),
            ("text-service/UploadText", 200.0, 90.0, "s:compose-review-service/UploadText"),
            ("compose-review-service/UploadText", 150.0, 70.0, "s:compose-review-memcached/set_text"),
            ("compose-review-memcached/set_text", 100.0, 50.0, ""),
            ("rating-service/UploadRating", 150.0, 70.0, "s:compose-review-service/UploadRating"),
            ("compose-review-service/UploadRating", 150.0, 70.0, "s:compose-review-memcached/set_rating"),
            ("compose-review-memcached/set_rating", 100.0, 50.0, ""),
            (
                "compose-review-service/UploadReview",
                300.0,
                110.0,
                "s:compose-review-memcached/get_all s:review-storage-service/StoreReview p:user-review-service/UploadUserReview p:movie-review-service/UploadMovieReview",
            ),
            ("compose-review-memcached/get_all", 150.0, 60.0, ""),
            ("review-storage-service/StoreReview", 250.0, 100.0, "s:review-storage-mongodb/insert s:review-storage-memcached/set"),
            ("review-storage-mongodb/insert", 2_000.0, 900.0, ""),
            ("review-storage-memcached/set", 100.0, 50.0, ""),
            ("user-review-service/UploadUserReview", 200.0, 90.0, "s:user-review-mongodb/find s:user-review-mongodb/update s:user-review-redis/zadd"),
            ("user-review-mongodb/find", 600.0, 200.0, ""),
            ("user-review-mongodb/update", 600.0, 200.0, ""),
            ("user-review-redis/zadd", 120.0, 60.0, ""),
            ("movie-review-service/UploadMovieReview", 200.0, 90.0, "s:movie-review-mongodb/find s:movie-review-mongodb/update s:movie-review-redis/zadd"),
            ("movie-review-mongodb/find", 600.0, 200.0, ""),
            ("movie-review-mongodb/update", 600.0, 200.0, ""),
            ("movie-review-redis/zadd", 120.0, 60.0, "s:movie-review-redis/expire"),
            ("movie-review-redis/expire", 80.0, 40.0, ""),
            ("nginx-web-server/Authenticate", 150.0, 60.0, ""),
            ("nginx-web-server/Log", 60.0, 30.0, ""),
        ],
    )
    .with_root_calls(&["s:nginx-web-server/Authenticate", "s:nginx-web-server/Log"])
}

impl TopologySpec {
    fn with_root_calls(mut self, calls: &[&str]) -> Self {
        let root = self.root.clone();
        let op = self
            .operations
            .iter_mut()
            .find(|o| o.identity == root)
            .expect("root declared");
        for c in calls {
            let (mode, callee) = c.split_once(':').expect("mode:callee");
            op.children.push(CallSpec {
                callee: ident(callee),
                mode: if mode == "p" {
                    CallMode::Parallel
                } else {
                    CallMode::Sequential
                },
            });
        }
        self
    }
}

/// Media-like topology where every span also carries a random `host` tag.
pub fn canary_topology() -> TopologySpec {
    let mut t = media_like();
    t.name = "canary".into();
    for (i, op) in t.operations.iter_mut().enumerate() {
        let hosts = (0..3)
            .map(|h| format!("{}-{h}", op.identity.service))
            .collect();
        op.random_tags.insert("host".into(), hosts);
        if i % 2 == 0 {
            op.random_tags
                .insert("zone".into(), vec!["a".into(), "b".into()]);
        }
    }
    t
}

pub fn canary_anomaly() -> AnomalySpec {
    AnomalySpec::Canary {
        service: CANARY_SERVICE.into(),
        fraction: CANARY_FRACTION,
        extra_delay: CANARY_DELAY,
    }
}

pub fn topology(name: &str) -> Option<TopologySpec> {
    match name {
        "socialnet-like" | "socialnet" => Some(socialnet_like()),
        "trainticket-like" | "trainticket" => Some(trainticket_like()),
        "media-like" | "media" => Some(media_like()),
        "canary" => Some(canary_topology()),
        _ => None,
    }
}

/// Anomalies shipped with a preset: the canary scenario has its canary
/// build; the others start clean.
pub fn default_anomalies(name: &str) -> Vec<AnomalySpec> {
    if name == "canary" {
        vec![canary_anomaly()]
    } else {
        Vec::new()
    }
}

pub fn random_delay(target: SpanIdentity) -> AnomalySpec {
    AnomalySpec::RandomDelay {
        target,
        probability: FAULT_PROBABILITY,
        delay: FAULT_DELAY,
    }
}

/// Seeded choice of a fault target among the non-root identities.
pub fn pick_fault_target(topology: &TopologySpec, seed: u64) -> SpanIdentity {
    let mut ids: Vec<&SpanIdentity> = topology
        .operations
        .iter()
        .map(|o| &o.identity)
        .filter(|i| **i != topology.root)
        .collect();
    ids.sort();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ 0xFA17_7A26_E700_0000);
    (*ids
        .choose(&mut rng)
        .expect("topology has non-root operations"))
    .clone()
}

//! Built-in ontology, venue database and synthetic corpora.
//!
//! These back the shipped fixture files, the test suites and the browser demo.
//! The multi-action generator produces states that recur across dialogs with
//! several valid system actions of different act types at skewed frequencies.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    self, DomainGoal, DomainSpec, InformableSlot, Ontology, Record, Triple, Turn, VenueDatabase,
    Dialog,
};
use crate::error::Result;
use crate::io;
use crate::spans::{self, BeliefState, SystemAction};

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn open(slot: &str) -> InformableSlot {
    InformableSlot {
        slot: slot.into(),
        values: None,
        book: false,
    }
}

fn closed(slot: &str, values: &[&str]) -> InformableSlot {
    InformableSlot {
        slot: slot.into(),
        values: Some(strings(values)),
        book: false,
    }
}

fn book(mut s: InformableSlot) -> InformableSlot {
    s.book = true;
    s
}

const AREAS: &[&str] = &["centre", "north", "south", "east", "west"];
const PRICES: &[&str] = &["cheap", "moderate", "expensive"];
const DAYS: &[&str] = &[
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
];
const PEOPLE: &[&str] = &["1", "2", "3", "4", "5", "6", "7", "8"];
const PLACES: &[&str] = &["cambridge", "london kings cross", "ely", "stansted airport"];

pub fn ontology() -> Ontology {
    let requestable = strings(&["phone", "address", "postcode", "price", "choice", "ref"]);
    let domains = vec![
        DomainSpec {
            name: "restaurant".into(),
            informable: vec![
                open("name"),
                closed("area", AREAS),
                closed("food", &["indian", "chinese", "italian", "british", "thai"]),
                closed("pricerange", PRICES),
                book(closed("day", DAYS)),
                book(closed("people", PEOPLE)),
                book(open("time")),
            ],
            requestable: requestable.clone(),
        },
        DomainSpec {
            name: "hotel".into(),
            informable: vec![
                open("name"),
                closed("area", AREAS),
                closed("type", &["hotel", "guesthouse"]),
                closed("parking", &["yes", "no"]),
                closed("pricerange", PRICES),
                closed("stars", &["0", "1", "2", "3", "4", "5"]),
                closed("internet", &["yes", "no"]),
                book(closed("day", DAYS)),
                book(closed("people", PEOPLE)),
                book(closed("stay", &["1", "2", "3", "4", "5", "6", "7"])),
            ],
            requestable: requestable.clone(),
        },
        DomainSpec {
            name: "attraction".into(),
            informable: vec![
                open("name"),
                closed("area", AREAS),
                closed("type", &["museum", "college", "park", "theatre"]),
            ],
            requestable: strings(&["phone", "address", "postcode", "choice"]),
        },
        DomainSpec {
            name: "train".into(),
            informable: vec![
                open("leave"),
                open("arrive"),
                closed("day", DAYS),
                closed("departure", PLACES),
                closed("destination", PLACES),
                book(closed("people", PEOPLE)),
            ],
            requestable: strings(&["id", "price", "duration", "choice", "ref"]),
        },
        DomainSpec {
            name: "taxi".into(),
            informable: vec![
                open("leave"),
                open("destination"),
                open("departure"),
                open("arrive"),
            ],
            requestable: strings(&["car", "phone"]),
        },
        DomainSpec {
            name: "general".into(),
            informable: vec![],
            requestable: vec![],
        },
    ];
    let slots = strings(&[
        "name",
        "choice",
        "price",
        "area",
        "food",
        "type",
        "pricerange",
        "stars",
        "parking",
        "internet",
        "phone",
        "address",
        "postcode",
        "id",
        "leave",
        "arrive",
        "departure",
        "destination",
        "duration",
        "day",
        "people",
        "stay",
        "time",
        "ref",
        "car",
    ]);
    let acts = strings(&[
        "inform",
        "recommend",
        "select",
        "request",
        "nooffer",
        "offerbook",
        "offerbooked",
        "nobook",
        "reqmore",
        "greet",
        "welcome",
        "bye",
        "thank",
    ]);
    Ontology::new(domains, slots, acts).expect("built-in ontology is valid")
}

const STREETS: &[&str] = &[
    "chesterton road",
    "regent street",
    "milton road",
    "hills road",
    "newmarket road",
    "trumpington street",
    "histon road",
    "mill lane",
];

fn contact(i: usize, record: &mut Record) {
    record.insert("phone".into(), format!("01223{:06}", (300_017 + i * 7_919) % 1_000_000));
    record.insert(
        "address".into(),
        format!("{} {}", 10 + (i * 37) % 190, STREETS[i % STREETS.len()]),
    );
    record.insert("postcode".into(), format!("cb{}{}{}", 1 + i % 5, (i * 3) % 10, ["ab", "da", "hx", "qt", "pe"][i % 5]));
}

fn rec(pairs: &[(&str, &str)]) -> Record {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

pub fn database() -> VenueDatabase {
    let ont = ontology();
    let mut n = 0;
    let mut next = || {
        n += 1;
        n
    };

    // (name, area, type, parking, pricerange, stars, internet)
    let hotels = [
        ("acorn guest house", "north", "guesthouse", "yes", "moderate", "4", "yes"),
        ("arbury lodge guesthouse", "north", "guesthouse", "yes", "moderate", "4", "yes"),
        ("archway house", "north", "guesthouse", "yes", "moderate", "4", "yes"),
        ("avalon", "north", "guesthouse", "yes", "moderate", "4", "yes"),
        ("home from home", "north", "guesthouse", "yes", "moderate", "4", "yes"),
        ("limehouse", "north", "guesthouse", "yes", "moderate", "4", "yes"),
        ("warkworth house", "east", "guesthouse", "yes", "moderate", "4", "yes"),
        ("carolina bed and breakfast", "east", "guesthouse", "yes", "moderate", "4", "yes"),
        ("a and b guest house", "east", "guesthouse", "yes", "moderate", "4", "yes"),
        ("alexander bed and breakfast", "centre", "guesthouse", "yes", "cheap", "4", "yes"),
        ("allenbell", "east", "guesthouse", "yes", "cheap", "4", "yes"),
        ("ashley hotel", "north", "hotel", "yes", "moderate", "2", "yes"),
        ("lovell lodge", "north", "hotel", "yes", "moderate", "2", "yes"),
        ("cityroomz", "centre", "hotel", "no", "moderate", "0", "yes"),
        ("gonville hotel", "centre", "hotel", "yes", "expensive", "3", "yes"),
        ("huntingdon marriott hotel", "west", "hotel", "yes", "expensive", "4", "yes"),
        ("the lensfield hotel", "south", "hotel", "yes", "expensive", "3", "yes"),
        ("rosa's bed and breakfast", "south", "guesthouse", "no", "cheap", "4", "yes"),
        ("el shaddai", "centre", "guesthouse", "no", "cheap", "0", "yes"),
        ("express by holiday inn cambridge", "east", "hotel", "yes", "expensive", "2", "yes"),
        ("finches bed and breakfast", "west", "guesthouse", "yes", "cheap", "4", "yes"),
        ("hobsons house", "west", "guesthouse", "yes", "moderate", "3", "yes"),
        ("bridge guest house", "south", "guesthouse", "yes", "moderate", "3", "yes"),
    ];
    let hotels: Vec<Record> = hotels
        .iter()
        .map(|(name, area, ty, parking, price, stars, internet)| {
            let mut r = rec(&[
                ("name", name),
                ("area", area),
                ("type", ty),
                ("parking", parking),
                ("pricerange", price),
                ("stars", stars),
                ("internet", internet),
            ]);
            contact(next(), &mut r);
            r
        })
        .collect();

    // (name, area, food, pricerange)
    let restaurants = [
        ("curry garden", "centre", "indian", "expensive"),
        ("golden wok", "north", "chinese", "moderate"),
        ("pizza hut city centre", "centre", "italian", "cheap"),
        ("the cow pizza kitchen and bar", "centre", "british", "moderate"),
        ("royal spice", "north", "indian", "cheap"),
        ("sala thong", "west", "thai", "expensive"),
        ("the nirala", "north", "indian", "moderate"),
        ("hakka", "north", "chinese", "expensive"),
        ("da vinci pizzeria", "north", "italian", "cheap"),
        ("the good luck chinese food takeaway", "south", "chinese", "expensive"),
        ("pipasha restaurant", "east", "indian", "expensive"),
        ("the missing sock", "east", "british", "cheap"),
        ("prezzo", "west", "italian", "moderate"),
        ("bangkok city", "centre", "thai", "expensive"),
        ("the lucky star", "south", "chinese", "cheap"),
        ("restaurant alimentum", "south", "british", "moderate"),
    ];
    let restaurants: Vec<Record> = restaurants
        .iter()
        .map(|(name, area, food, price)| {
            let mut r = rec(&[("name", name), ("area", area), ("food", food), ("pricerange", price)]);
            contact(next(), &mut r);
            r
        })
        .collect();

    let attractions = [
        ("cambridge towninfo centre", "centre", "museum"),
        ("kettle's yard", "west", "museum"),
        ("christ's college", "centre", "college"),
        ("milton country park", "north", "park"),
        ("adc theatre", "centre", "theatre"),
    ];
    let attractions: Vec<Record> = attractions
        .iter()
        .map(|(name, area, ty)| {
            let mut r = rec(&[("name", name), ("area", area), ("type", ty)]);
            contact(next(), &mut r);
            r
        })
        .collect();

    // (id, departure, destination, day, leave, arrive, price, duration)
    let trains = [
        ("tr1234", "cambridge", "london kings cross", "friday", "05:00", "05:51", "23.60 pounds", "51 minutes"),
        ("tr2515", "cambridge", "london kings cross", "friday", "07:00", "07:51", "23.60 pounds", "51 minutes"),
        ("tr6110", "london kings cross", "cambridge", "sunday", "09:17", "10:08", "18.88 pounds", "51 minutes"),
        ("tr4004", "cambridge", "ely", "monday", "11:50", "12:07", "4.40 pounds", "17 minutes"),
        ("tr8952", "stansted airport", "cambridge", "tuesday", "14:24", "14:52", "10.10 pounds", "28 minutes"),
    ];
    let trains: Vec<Record> = trains
        .iter()
        .map(|(id, dep, dest, day, leave, arrive, price, duration)| {
            rec(&[
                ("id", id),
                ("departure", dep),
                ("destination", dest),
                ("day", day),
                ("leave", leave),
                ("arrive", arrive),
                ("price", price),
                ("duration", duration),
            ])
        })
        .collect();

    let mut domains = BTreeMap::new();
    domains.insert("hotel".to_string(), hotels);
    domains.insert("restaurant".to_string(), restaurants);
    domains.insert("attraction".to_string(), attractions);
    domains.insert("train".to_string(), trains);
    VenueDatabase::new(domains, &ont).expect("built-in database is valid")
}

fn triples(xs: &[(&str, &str, &str)]) -> Vec<Triple> {
    xs.iter().map(|(d, a, s)| Triple::new(d, a, s)).collect()
}

fn turn(
    user: &str,
    user_acts: &[(&str, &str, &str)],
    belief: &BeliefState,
    sys_acts: &[(&str, &str, &str)],
    response: &str,
) -> Turn {
    Turn {
        user: corpus::normalize_text(user),
        user_acts: triples(user_acts),
        belief: belief.clone(),
        sys_acts: triples(sys_acts),
        response: corpus::normalize_text(response),
        delex_response: None,
        substitutions: Vec::new(),
    }
}

fn goal(domain: &str, inform: &[(&str, &str)], request: &[&str], booking: &[(&str, &str)]) -> (String, DomainGoal) {
    let m = |xs: &[(&str, &str)]| xs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    (
        domain.to_string(),
        DomainGoal {
            inform: m(inform),
            request: strings(request),
            book: m(booking),
        },
    )
}

/// Hand-written dialogs: a hotel search ending in a recommendation over nine
/// matching venues, a restaurant booking followed by a taxi, and three
/// variants of the hotel search where the system asks for the area instead.
pub fn handcrafted_dialogs() -> Vec<Dialog> {
    let db = database();
    let acorn = &db.records("hotel")[0];
    let curry = &db.records("restaurant")[0];

    let empty = BeliefState::new();
    let hotel_b = BeliefState::new()
        .with("hotel", "parking", "yes")
        .with("hotel", "pricerange", "moderate")
        .with("hotel", "stars", "4")
        .with("hotel", "internet", "yes");
    let guesthouse = Dialog {
        dialog_id: "guesthouse".into(),
        goal: [goal(
            "hotel",
            &[("parking", "yes"), ("pricerange", "moderate"), ("stars", "4"), ("internet", "yes")],
            &["phone"],
            &[],
        )]
        .into_iter()
        .collect(),
        turns: vec![
            turn(
                "I need a place to stay in town.",
                &[("hotel", "inform", "")],
                &empty,
                &[("hotel", "inform", "choice"), ("hotel", "request", "price"), ("hotel", "request", "parking")],
                "I also have many pricing options and amenity options . Could you give me some direction ?",
            ),
            turn(
                "Sure . 4 star , nothing but the best , free wifi moderately priced and free parking too .",
                &[
                    ("hotel", "inform", "stars"),
                    ("hotel", "inform", "internet"),
                    ("hotel", "inform", "pricerange"),
                    ("hotel", "inform", "parking"),
                ],
                &hotel_b,
                &[("hotel", "recommend", "price"), ("hotel", "recommend", "name"), ("hotel", "offerbook", "")],
                "May I recommend acorn guest house ? It is moderate and fits all your criteria . Would you like me to reserve you any rooms ?",
            ),
            turn(
                "Not yet . What is their phone number ?",
                &[("hotel", "request", "phone")],
                &hotel_b,
                &[("hotel", "inform", "phone"), ("general", "reqmore", "")],
                &format!("The phone number is {} . Anything else ?", acorn["phone"]),
            ),
        ],
    };

    let r0 = BeliefState::new()
        .with("restaurant", "area", "centre")
        .with("restaurant", "food", "indian")
        .with("restaurant", "pricerange", "expensive");
    let r1 = r0
        .clone()
        .with("restaurant", "name", "curry garden")
        .with("restaurant", "people", "2")
        .with("restaurant", "time", "18:00")
        .with("restaurant", "day", "friday");
    let r2 = r1
        .clone()
        .with("taxi", "leave", "20:00")
        .with("taxi", "destination", "kings street");
    let dinner = Dialog {
        dialog_id: "dinner-taxi".into(),
        goal: [
            goal(
                "restaurant",
                &[("area", "centre"), ("food", "indian"), ("pricerange", "expensive")],
                &["address"],
                &[("day", "friday"), ("people", "2"), ("time", "18:00")],
            ),
            goal("taxi", &[("destination", "kings street"), ("leave", "20:00")], &["car"], &[]),
        ]
        .into_iter()
        .collect(),
        turns: vec![
            turn(
                "I want an expensive indian restaurant in the centre .",
                &[
                    ("restaurant", "inform", "food"),
                    ("restaurant", "inform", "pricerange"),
                    ("restaurant", "inform", "area"),
                ],
                &r0,
                &[("restaurant", "recommend", "name"), ("restaurant", "recommend", "address")],
                &format!("Curry Garden is a nice place at {} .", curry["address"]),
            ),
            turn(
                "Please book curry garden for 2 people at 18:00 on friday .",
                &[
                    ("restaurant", "inform", "name"),
                    ("restaurant", "inform", "people"),
                    ("restaurant", "inform", "time"),
                    ("restaurant", "inform", "day"),
                ],
                &r1,
                &[("restaurant", "offerbooked", "ref"), ("general", "reqmore", "")],
                "Booked for 2 people on friday at 18:00 . Your reference number is xq7v2k . Anything else ?",
            ),
            turn(
                "I also need a taxi leaving at 20:00 to kings street .",
                &[("taxi", "inform", "leave"), ("taxi", "inform", "destination")],
                &r2,
                &[("taxi", "inform", "car"), ("taxi", "inform", "phone")],
                "A black toyota will pick you up at 20:00 . The contact number is 07700900123 .",
            ),
            turn(
                "Thanks , bye .",
                &[("general", "bye", "")],
                &r2,
                &[("general", "bye", "")],
                "Goodbye , enjoy your meal .",
            ),
        ],
    };
    // Other crowd workers in the same state: most narrow the search by asking
    // for the area instead of recommending.
    let mut out = vec![guesthouse.clone(), dinner];
    let responses = [
        "I have several places that fit . Which area would you like ?",
        "There are many options . Do you have a preferred area ?",
        "Quite a few hotels match that . What part of town are you looking at ?",
    ];
    for (i, response) in responses.into_iter().enumerate() {
        let mut d = guesthouse.clone();
        d.dialog_id = format!("guesthouse-area{}", i + 1);
        d.turns.truncate(2);
        d.turns[1].sys_acts = triples(&[("hotel", "inform", "choice"), ("hotel", "request", "area")]);
        d.turns[1].response = corpus::normalize_text(response);
        out.push(d);
    }
    out
}

/// `n_first` dialogs taking action A1 and `n_second` taking A2 from one
/// shared state. A1 and A2 have different act types.
pub fn balance_corpus(n_first: usize, n_second: usize) -> Vec<Dialog> {
    let belief = BeliefState::new().with("hotel", "area", "north");
    (0..n_first + n_second)
        .map(|i| {
            let (acts, response): (&[(&str, &str, &str)], &str) = if i < n_first {
                (
                    &[("hotel", "inform", "choice"), ("hotel", "request", "price")],
                    "there are 8 hotels in the north . what price range would you like ?",
                )
            } else {
                (
                    &[("hotel", "recommend", "name")],
                    "i would suggest the acorn guest house .",
                )
            };
            Dialog {
                dialog_id: format!("bal{i:02}"),
                goal: [goal("hotel", &[("area", "north")], &[], &[])].into_iter().collect(),
                turns: vec![turn(
                    "i need a hotel in the north",
                    &[("hotel", "inform", "area")],
                    &belief,
                    acts,
                    response,
                )],
            }
        })
        .collect()
}

/// Action options per dialog stage: (action span without the domain marker, weight).
type Options = &'static [(&'static str, f64)];

const STAGE_SEARCH: Options = &[
    ("[inform] choice [request] price", 0.70),
    ("[recommend] name area", 0.12),
    ("[request] price", 0.10),
    ("[select] area [inform] choice", 0.08),
];
const STAGE_PRICE: Options = &[
    ("[recommend] name [offerbook]", 0.70),
    ("[inform] name address", 0.14),
    ("[recommend] name postcode [inform] choice", 0.10),
    ("[select] name", 0.06),
];
const STAGE_PHONE: Options = &[
    ("[inform] phone", 0.72),
    ("[inform] phone address", 0.14),
    ("[inform] phone [offerbook]", 0.14),
];
const STAGE_BYE: Options = &[("[bye]", 0.8), ("[welcome] [bye]", 0.2)];

const SINGLE_SEARCH: Options = &[
    ("[request] price", 0.75),
    ("[recommend] name area", 0.15),
    ("[inform] choice", 0.10),
];
const SINGLE_PRICE: Options = &[
    ("[recommend] name", 0.72),
    ("[inform] name address", 0.18),
    ("[select] name", 0.10),
];
const SINGLE_PHONE: Options = &[("[inform] phone", 0.8), ("[inform] phone postcode", 0.2)];
const SINGLE_BYE: Options = &[("[bye]", 1.0)];

fn pick(rng: &mut ChaCha8Rng, options: Options) -> &'static str {
    let total: f64 = options.iter().map(|(_, w)| w).sum();
    let mut x = rng.gen::<f64>() * total;
    for (span, w) in options {
        if x < *w {
            return span;
        }
        x -= w;
    }
    options.last().unwrap().0
}

/// Surface realization for the synthetic actions. Every value inserted is
/// taken from the entity so delexicalization can find it again.
fn realize(span: &str, domain: &str, entity: &Record, choice: usize) -> String {
    let v = |s: &str| entity.get(s).cloned().unwrap_or_default();
    let kind = if domain == "hotel" { "hotels" } else { "restaurants" };
    match span {
        "[inform] choice [request] price" => format!(
            "there are {choice} {kind} in the {} . what price range would you like ?",
            v("area")
        ),
        "[inform] choice" => format!("i have {choice} {kind} in the {} .", v("area")),
        "[recommend] name area" => format!("i would suggest {} in the {} .", v("name"), v("area")),
        "[request] price" => "what price range are you looking for ?".into(),
        "[select] area [inform] choice" => format!(
            "there are {choice} options . do you prefer the {} or somewhere else ?",
            v("area")
        ),
        "[recommend] name [offerbook]" => format!("{} is a good choice . shall i book it ?", v("name")),
        "[recommend] name" => format!("{} is a good choice .", v("name")),
        "[inform] name address" => format!("{} is located at {} .", v("name"), v("address")),
        "[recommend] name postcode [inform] choice" => format!(
            "of the {choice} options i recommend {} , postcode {} .",
            v("name"),
            v("postcode")
        ),
        "[select] name" => format!("would you like {} or another place ?", v("name")),
        "[inform] phone" => format!("their phone number is {} .", v("phone")),
        "[inform] phone address" => format!(
            "the phone number is {} and the address is {} .",
            v("phone"),
            v("address")
        ),
        "[inform] phone postcode" => format!(
            "the phone number is {} , postcode {} .",
            v("phone"),
            v("postcode")
        ),
        "[inform] phone [offerbook]" => format!(
            "you can reach them on {} . would you like a booking ?",
            v("phone")
        ),
        "[bye]" => "goodbye , have a nice day .".into(),
        "[welcome] [bye]" => "you are welcome . goodbye .".into(),
        other => unreachable!("no realization for {other}"),
    }
}

/// Seeded hotel/restaurant dialogs of four turns each (search by area, narrow
/// by price, ask for the phone number, say goodbye). With `single_act` every
/// system action carries exactly one act type.
pub fn generated_dialogs(n: usize, seed: u64, single_act: bool) -> Vec<Dialog> {
    let ont = ontology();
    let db = database();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stages: [Options; 4] = if single_act {
        [SINGLE_SEARCH, SINGLE_PRICE, SINGLE_PHONE, SINGLE_BYE]
    } else {
        [STAGE_SEARCH, STAGE_PRICE, STAGE_PHONE, STAGE_BYE]
    };
    let prefix = if single_act { "single" } else { "gen" };
    (0..n)
        .map(|i| {
            let domain = if rng.gen_bool(0.5) { "hotel" } else { "restaurant" };
            let records = db.records(domain);
            let target = &records[rng.gen_range(0..records.len())];
            let area = target["area"].clone();
            let price = target["pricerange"].clone();

            let b0 = BeliefState::new().with(domain, "area", &area);
            let b1 = b0.clone().with(domain, "pricerange", &price);
            let count0 = spans::match_count(&b0, domain, &db, &ont).unwrap_or(0);
            let count1 = spans::match_count(&b1, domain, &db, &ont).unwrap_or(0);
            let c0 = BTreeMap::from([("area".to_string(), area.clone())]);
            let first0 = db.query(&ont, domain, &c0).next().unwrap().clone();
            let entity = db
                .query(&ont, domain, b1.domain(domain).unwrap())
                .next()
                .unwrap()
                .clone();

            let kind = if domain == "hotel" { "hotel" } else { "restaurant" };
            let users = [
                format!("i am looking for a {kind} in the {area} ."),
                format!("something in the {price} price range please ."),
                "what is the phone number ?".to_string(),
                "thank you , goodbye .".to_string(),
            ];
            let user_acts: [Vec<Triple>; 4] = [
                vec![Triple::new(domain, "inform", "area")],
                vec![Triple::new(domain, "inform", "pricerange")],
                vec![Triple::new(domain, "request", "phone")],
                vec![Triple::new("general", "bye", "")],
            ];
            let beliefs = [&b0, &b1, &b1, &b1];
            let turns = (0..4)
                .map(|t| {
                    let span = pick(&mut rng, stages[t]);
                    let (ent, choice) = if t == 0 { (&first0, count0) } else { (&entity, count1) };
                    let sys_domain = if t == 3 { "general" } else { domain };
                    let full = format!("{} {span}", spans::marker(sys_domain));
                    let action = spans::parse_action_span(&full, &ont, None)
                        .expect("synthetic spans parse");
                    Turn {
                        user: users[t].clone(),
                        user_acts: user_acts[t].clone(),
                        belief: beliefs[t].clone(),
                        sys_acts: action.triples().cloned().collect(),
                        response: realize(span, domain, ent, choice),
                        delex_response: None,
                        substitutions: Vec::new(),
                    }
                })
                .collect();
            Dialog {
                dialog_id: format!("{prefix}{seed}-{i:04}"),
                goal: [goal(domain, &[("area", &area), ("pricerange", &price)], &["phone"], &[])]
                    .into_iter()
                    .collect(),
                turns,
            }
        })
        .collect()
}

/// The shipped fixture corpus: the hand-written dialogs plus 60 generated ones.
pub fn fixture_corpus() -> Vec<Dialog> {
    let mut out = handcrafted_dialogs();
    out.extend(generated_dialogs(60, 11, false));
    out
}

const OPEN_WORDS: &[&str] = &[
    "acorn", "guest", "house", "kings", "street", "curry", "garden", "18:00", "20:00", "cambridge",
    "the", "old", "mill", "2",
];

fn random_value<R: Rng + ?Sized>(rng: &mut R, slot: &InformableSlot) -> String {
    match &slot.values {
        Some(vs) => vs[rng.gen_range(0..vs.len())].clone(),
        None => (0..rng.gen_range(1..=3))
            .map(|_| OPEN_WORDS[rng.gen_range(0..OPEN_WORDS.len())])
            .collect::<Vec<_>>()
            .join(" "),
    }
}

/// A random non-empty belief state that is valid under `ontology`.
pub fn random_belief<R: Rng + ?Sized>(rng: &mut R, ontology: &Ontology) -> BeliefState {
    let domains: Vec<&DomainSpec> = ontology.domains().iter().filter(|d| !d.informable.is_empty()).collect();
    let mut b = BeliefState::new();
    while b.is_empty() {
        for d in &domains {
            if !rng.gen_bool(0.4) {
                continue;
            }
            for s in &d.informable {
                if rng.gen_bool(0.5) {
                    b.insert(&d.name, &s.slot, &random_value(rng, s));
                }
            }
        }
    }
    b
}

/// A random non-empty system action over the ontology's domains, acts and slots.
pub fn random_action<R: Rng + ?Sized>(rng: &mut R, ontology: &Ontology) -> SystemAction {
    let domains = ontology.domains();
    let acts = ontology.acts();
    let mut triples = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let d = &domains[rng.gen_range(0..domains.len())];
        let slots: Vec<&str> = d
            .informable
            .iter()
            .map(|s| s.slot.as_str())
            .chain(d.requestable.iter().map(String::as_str))
            .collect();
        for _ in 0..rng.gen_range(1..=3) {
            let act = &acts[rng.gen_range(0..acts.len())];
            let n = if slots.is_empty() { 0 } else { rng.gen_range(0..=3) };
            if n == 0 {
                triples.push(Triple::new(&d.name, act, ""));
            }
            for _ in 0..n {
                triples.push(Triple::new(&d.name, act, slots[rng.gen_range(0..slots.len())]));
            }
        }
    }
    SystemAction::from_triples(triples)
}

/// Writes the shipped fixture files (`ontology.json`, `db.json`,
/// `corpus.json`, `balance.json`) into `dir`.
pub fn write_fixtures(dir: &Path) -> Result<()> {
    io::write_json(&dir.join("ontology.json"), &ontology())?;
    io::write_json(&dir.join("db.json"), &database())?;
    corpus::save_corpus(&dir.join("corpus.json"), &fixture_corpus())?;
    corpus::save_corpus(&dir.join("balance.json"), &balance_corpus(9, 1))
}

use crate::data::{extract_examples, Session};
use crate::error::{Error, Result};
use crate::eval::metrics::{evaluate, EvalConfig, EvalReport, UserHistory};
use crate::rng::SeededRng;
use crate::zoo::{train_model, ModelFamily, ModelSettings, Trained};

/// The splits and sizes a train-and-evaluate run needs.
#[derive(Debug, Clone, Copy)]
pub struct SweepData<'a> {
    pub train: &'a [Session],
    pub test: &'a [Session],
    pub n_users: usize,
    pub n_items: usize,
}

#[derive(Debug, Clone)]
pub struct OrderReport {
    pub order: usize,
    pub trained: Trained,
    pub report: EvalReport,
}

/// The generator a training run of `family` draws from.
pub fn training_rng(seed: u64, family: ModelFamily) -> SeededRng {
    SeededRng::for_component(seed, &format!("train-{family}"))
}

/// Trains `family` with [`training_rng`] and evaluates it on the test
/// examples of order `settings.neural.j`.
pub fn train_and_evaluate(
    data: SweepData<'_>,
    family: ModelFamily,
    settings: &ModelSettings,
    eval: &EvalConfig,
    seed: u64,
    on_epoch: impl FnMut(usize, f64),
) -> Result<(Trained, EvalReport)> {
    let mut rng = training_rng(seed, family);
    let trained = train_model(family, settings, data.train, data.n_users, data.n_items, &mut rng, on_epoch)?;
    let examples = extract_examples(data.test, settings.neural.j);
    let history = UserHistory::from_sessions(data.train, data.n_users);
    let report = evaluate(&trained.model, &examples, eval, Some(&history))?;
    Ok((trained, report))
}

/// One fresh model per order, identical seeds and settings apart from `j`.
pub fn sweep_order(
    data: SweepData<'_>,
    family: ModelFamily,
    orders: &[usize],
    settings: &ModelSettings,
    eval: &EvalConfig,
    seed: u64,
) -> Result<Vec<OrderReport>> {
    if orders.is_empty() {
        return Err(Error::Empty("orders"));
    }
    if let Some(bad) = orders.iter().find(|j| !(1..=10).contains(*j)) {
        return Err(Error::InvalidArgument(format!("order {bad} outside [1, 10]")));
    }
    orders
        .iter()
        .map(|&order| {
            log::info!("sweep: {family} with j = {order}");
            let (trained, report) = train_and_evaluate(data, family, &settings.with_order(order), eval, seed, |_, _| {})?;
            Ok(OrderReport { order, trained, report })
        })
        .collect()
}

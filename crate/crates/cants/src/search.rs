//! The threaded search driver.
//!
//! One coordinator (the calling thread) owns the [`Colony`]. Workers pull
//! candidates, train them and send the result back; the coordinator folds
//! results in arrival order. With a single worker the run is reproducible
//! bit for bit.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::thread;

use cants_core::colony::Candidate;
use cants_core::rnn::{self, RnnError};
use cants_core::{AgentPath, Colony, ColonyConfig, ColonyError, FitnessReport, RnnGenome, Sequence, TrainConfig, TrainReport};

use crate::trace::ReplayFrame;

/// Consecutive generation failures tolerated before a run gives up.
const GENERATION_ATTEMPTS: usize = 10;

pub struct Trained {
    pub genome: RnnGenome,
    pub report: TrainReport,
}

/// Turns a candidate genome into a trained genome and its fitness. Shared by
/// all workers.
pub trait Trainer: Sync {
    fn train(&self, genome: &RnnGenome) -> Result<Trained, String>;
}

/// Trains with backpropagation through time on fixed splits.
pub struct SequenceTrainer {
    pub train: Sequence,
    pub validation: Sequence,
    pub test: Sequence,
    pub config: TrainConfig,
}

impl Trainer for SequenceTrainer {
    fn train(&self, genome: &RnnGenome) -> Result<Trained, String> {
        rnn::train(genome, &self.train, &self.validation, &self.test, &self.config)
            .map(|(genome, report)| Trained { genome, report })
            .map_err(|e: RnnError| e.to_string())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error(transparent)]
    Colony(#[from] ColonyError),
    #[error("candidate generation failed {0} times in a row")]
    Generation(usize),
    #[error("all workers stopped before the run finished")]
    WorkersLost,
    #[error("no candidate was accepted")]
    NothingAccepted,
}

#[derive(Debug, Clone)]
pub struct Best {
    pub candidate: u64,
    pub genome: RnnGenome,
    pub report: TrainReport,
}

pub struct RunOutcome {
    /// Final colony: population, history and pheromone space.
    pub colony: Colony,
    pub best: Option<Best>,
}

struct Job {
    id: u64,
    genome: RnnGenome,
}

enum Message {
    Request(usize),
    Done { candidate: u64, result: Result<Box<Trained>, String> },
}

fn worker<T: Trainer>(index: usize, trainer: &T, to_coord: mpsc::Sender<Message>, jobs: mpsc::Receiver<Option<Job>>) {
    loop {
        if to_coord.send(Message::Request(index)).is_err() {
            return;
        }
        let Ok(Some(job)) = jobs.recv() else {
            return;
        };
        let result = match catch_unwind(AssertUnwindSafe(|| trainer.train(&job.genome))) {
            Ok(r) => r.map(Box::new),
            Err(panic) => Err(panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "worker panicked".into())),
        };
        if to_coord.send(Message::Done { candidate: job.id, result }).is_err() {
            return;
        }
    }
}

fn generate(colony: &mut Colony) -> Result<Candidate, SearchError> {
    for attempt in 1..=GENERATION_ATTEMPTS {
        match colony.generate_candidate() {
            Ok(c) => return Ok(c),
            Err(e @ ColonyError::AllPathsAborted { .. }) => log::warn!("generation attempt {attempt}: {e}"),
            Err(e) => return Err(e.into()),
        }
    }
    Err(SearchError::Generation(GENERATION_ATTEMPTS))
}

/// Runs a search until `config.max_iterations` candidates have been
/// reported. `on_frame` sees one replay frame per accepted candidate, in
/// arrival order.
pub fn run<T: Trainer>(
    config: &ColonyConfig,
    num_inputs: usize,
    num_outputs: usize,
    trainer: &T,
    mut on_frame: impl FnMut(&ReplayFrame),
) -> Result<RunOutcome, SearchError> {
    let mut colony = Colony::new(*config, num_inputs, num_outputs)?;
    let mut reports: BTreeMap<u64, TrainReport> = BTreeMap::new();
    thread::scope(|scope| -> Result<(), SearchError> {
        let (to_coord, inbox) = mpsc::channel();
        let mut job_senders = Vec::with_capacity(config.workers);
        for index in 0..config.workers {
            let (tx, rx) = mpsc::channel();
            job_senders.push(tx);
            let to_coord = to_coord.clone();
            scope.spawn(move || worker(index, trainer, to_coord, rx));
        }
        drop(to_coord);

        let mut in_flight: BTreeMap<u64, Vec<AgentPath>> = BTreeMap::new();
        let (mut issued, mut reported) = (0, 0);
        while reported < config.max_iterations {
            match inbox.recv().map_err(|_| SearchError::WorkersLost)? {
                Message::Request(w) => {
                    let job = if issued < config.max_iterations {
                        issued += 1;
                        let c = generate(&mut colony)?;
                        in_flight.insert(c.id, c.paths);
                        Some(Job { id: c.id, genome: c.genome })
                    } else {
                        None
                    };
                    // a worker that already quit simply loses its job
                    let _ = job_senders[w].send(job);
                }
                Message::Done { candidate, result } => {
                    reported += 1;
                    let paths = in_flight.remove(&candidate).unwrap_or_default();
                    match result {
                        Ok(t) => {
                            let fitness = t.report.fitness;
                            let accepted =
                                colony.report_fitness(FitnessReport { candidate, genome: t.genome, fitness })?;
                            if accepted {
                                reports.insert(candidate, t.report);
                                let members = colony.population().members();
                                reports.retain(|id, _| members.iter().any(|m| m.candidate == *id));
                                let genome = &members.iter().find(|m| m.candidate == candidate).unwrap().genome;
                                let iteration = colony.history().len() - 1;
                                on_frame(&ReplayFrame::capture(iteration, candidate, colony.space(), &paths, genome, fitness));
                            }
                            log::debug!("candidate {candidate}: fitness {fitness:.6} accepted {accepted}");
                        }
                        Err(msg) => {
                            log::warn!("candidate {candidate} failed in its worker: {msg}");
                            colony.report_failure(candidate)?;
                        }
                    }
                    if reported % 50 == 0 {
                        log::info!("{}", colony.describe());
                    }
                }
            }
        }
        Ok(())
    })?;
    let best = colony.population().best().map(|m| Best {
        candidate: m.candidate,
        genome: m.genome.clone(),
        report: reports[&m.candidate].clone(),
    });
    Ok(RunOutcome { colony, best })
}

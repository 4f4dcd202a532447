# Services Package
from services.experiments import ExperimentSpec, run_experiment
from services.replay import replay_transcript

"""Command-line entry points: run, analyze, synth, bench."""
from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from .analysis import analyze as analyze_recording
from .analysis import write_report
from .engine import Engine, bench as run_bench
from .errors import IbsyncError
from .pipeline import EngineConfig, MODALITIES
from .recording import CONDITIONS, Recorder, Recording, replay
from .signals import FilterSpec
from .synth import ArtifactBurst, SynthConfig, synthesize


def _config_from(path: str | None, **overrides) -> EngineConfig:
    raw: dict = {}
    if path:
        raw = json.loads(Path(path).read_text())
    raw.update({k: v for k, v in overrides.items() if v is not None})
    filter_spec = FilterSpec(
        low_cut=raw.get("filter_low", 1.0),
        high_cut=raw.get("filter_high", 48.0),
        order=raw.get("filter_order", 4),
        mode=raw.get("filter_mode", "causal"),
    )
    haptic_table = raw.get("haptic_table")
    return EngineConfig(
        window_s=raw.get("window_s", 3.0),
        hop_s=raw.get("hop_s", 1.5),
        tick_ms=raw.get("tick_ms", 100),
        filter_spec=filter_spec,
        bin_edges=tuple(raw.get("bin_edges", (0.2, 0.4, 0.6, 0.8))),
        modality=raw.get("modality", "none"),
        audio_preset=raw.get("audio_preset", "linear"),
        haptic_table=tuple(tuple(row) for row in haptic_table) if haptic_table else None,
        osc_host=raw.get("osc_host"),
        osc_port=raw.get("osc_port", 9000),
        haptic_url=raw.get("haptic_url"),
        console_port=raw.get("console_port"),
    )


def _parse_bursts(specs) -> tuple[ArtifactBurst, ...]:
    bursts = []
    for spec in specs:
        try:
            start, duration, participant = spec.split(":")
            bursts.append(ArtifactBurst(float(start), float(duration), participant.upper()))
        except ValueError as exc:
            raise click.BadParameter(f"burst format is START:DURATION:PARTICIPANT, got {spec!r}") from exc
    return tuple(bursts)


@click.group()
def main():
    """Inter-brain synchrony engine."""


@main.command()
@click.option("--synth", "use_synth", is_flag=True, help="Use the synthetic dual-EEG source.")
@click.option("--replay", "replay_dir", type=click.Path(exists=True), help="Replay a recording directory.")
@click.option("--listen", "listen_port", type=int, default=None,
              help="Accept live wire-framed TCP streams on this port (0 picks one); run until interrupted.")
@click.option("--duration", type=float, default=60.0, show_default=True, help="Synthetic session length, s.")
@click.option("--coupling", type=float, default=0.7, show_default=True, help="Synthetic phase coupling in [0,1].")
@click.option("--band", type=click.Choice(["theta", "alpha", "beta"]), default="alpha", show_default=True)
@click.option("--artifact", "artifacts", multiple=True, help="Motion burst START:DURATION:PARTICIPANT (repeatable).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--speed", type=float, default=1.0, show_default=True, help="Pacing multiplier for live runs.")
@click.option("--batch", is_flag=True, help="Run unpaced in-process (no threads, no pacing).")
@click.option("--modality", type=click.Choice(MODALITIES), default=None)
@click.option("--condition", type=click.Choice(CONDITIONS), default=None, help="Initial condition label.")
@click.option("--osc", "osc_endpoint", default=None, help="OSC endpoint HOST:PORT.")
@click.option("--haptic-url", default=None, help="Haptic device base URL, e.g. http://127.0.0.1:8123.")
@click.option("--console-port", type=int, default=None, help="Control channel (WebSocket) port; 0 picks a free one.")
@click.option("--record", "record_dir", type=click.Path(), default=None, help="Record the session to this directory.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="JSON config file.")
@click.option("--open-trial", is_flag=True, help="Open a trial at session start (closes at stop).")
def run(use_synth, replay_dir, listen_port, duration, coupling, band, artifacts, seed, speed,
        batch, modality, condition, osc_endpoint, haptic_url, console_port, record_dir,
        config_path, open_trial):
    """Run the engine over a synthetic session, a recording, or live streams."""
    sources = sum([use_synth, bool(replay_dir), listen_port is not None])
    if sources != 1:
        raise click.UsageError("choose exactly one source: --synth, --replay DIR, or --listen PORT")

    osc_host, osc_port = None, 9000
    if osc_endpoint:
        host, _, port = osc_endpoint.partition(":")
        osc_host, osc_port = host, int(port or 9000)
    config = _config_from(
        config_path,
        modality=modality,
        osc_host=osc_host,
        osc_port=osc_port if osc_host else None,
        haptic_url=haptic_url,
        console_port=console_port,
    )

    recorder = None
    if record_dir:
        recorder = Recorder(record_dir, session_id=f"session-{int(time.time())}",
                            config_snapshot=config.snapshot())
    engine = Engine(config, recorder=recorder)
    if condition:
        engine.set_condition(condition)
    if modality:
        engine.set_modality(modality)

    server = None
    if config.console_port is not None:
        from .control import ControlChannelServer

        server = ControlChannelServer(engine, port=config.console_port).start()
        click.echo(f"control channel on ws://127.0.0.1:{server.port}")

    try:
        if listen_port is not None:
            bound = engine.start_tcp_server(port=listen_port)
            click.echo(f"listening for frame streams on tcp://0.0.0.0:{bound}")
            if open_trial:
                engine.mark_trial("start")
            try:
                while True:
                    time.sleep(0.5)
            except KeyboardInterrupt:
                click.echo("stopping")
            if open_trial:
                engine.mark_trial("stop")
            engine.stop()
            updates = engine.updates
        elif batch:
            if use_synth:
                synth_config = SynthConfig(duration_s=duration, coupling=coupling,
                                           carrier_band=band, artifact_schedule=_parse_bursts(artifacts))
                frames = synthesize(synth_config, seed=seed).frames()
            else:
                frames = Recording(replay_dir).frames()
            if open_trial:
                engine.mark_trial("start")
            updates = engine.run_batch(frames)
            if open_trial:
                engine.mark_trial("stop")
        else:
            if use_synth:
                synth_config = SynthConfig(duration_s=duration, coupling=coupling,
                                           carrier_band=band, artifact_schedule=_parse_bursts(artifacts))
                engine.start_synth(synth_config, seed=seed, speed=speed)
            else:
                engine.start_live(replay(Recording(replay_dir), speed=speed))
            if open_trial:
                engine.mark_trial("start")
            engine.wait()
            if open_trial:
                engine.mark_trial("stop")
            engine.stop()
            updates = engine.updates
    except IbsyncError as exc:
        raise click.ClickException(str(exc))
    finally:
        if server is not None:
            server.stop()
        if recorder is not None:
            recorder.close()

    valid = sum(1 for u in updates if u.metric.valid)
    held = sum(1 for u in updates if u.metric.held)
    click.echo(f"published {len(updates)} updates ({valid} valid, {held} held)")
    stats = engine.latency_stats()
    if "total" in stats:
        total = stats["total"]
        click.echo(f"compute latency p50={total['p50']:.2f} ms p95={total['p95']:.2f} ms "
                   f"max={total['max']:.2f} ms over {total['count']} updates")


@main.command()
@click.argument("recording_dir", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Report directory (default: recording).")
@click.option("--threshold-k", type=float, default=3.0, show_default=True, help="MAD multiplier for epoch rejection.")
@click.option("--hop", type=float, default=0.5, show_default=True, help="Offline epoch hop, s.")
@click.option("--per-band", is_flag=True, help="Also pool per EEG band (theta/alpha/beta).")
@click.option("--causal", is_flag=True, help="Causal filter mode (matches the live path exactly).")
def analyze(recording_dir, out_dir, threshold_k, hop, per_band, causal):
    """Post-study analysis of a recording; writes report.json and report.csv."""
    recording = Recording(recording_dir)
    filter_spec = FilterSpec(mode="causal" if causal else "zero_phase")
    report = analyze_recording(
        recording,
        hop_s=hop,
        threshold_k=threshold_k,
        filter_spec=filter_spec,
        per_band=per_band,
    )
    json_path, csv_path = write_report(report, out_dir or recording_dir)
    for warning in report.warnings:
        click.echo(f"warning: {warning}", err=True)
    for trial in report.trials:
        status = "ok" if trial.trial_valid else "rejected"
        pooled = f"{trial.pooled_ccorr:.4f}" if trial.pooled_ccorr is not None else "-"
        click.echo(
            f"trial {trial.trial_id} [{trial.condition}] {status}: "
            f"{trial.valid}/{trial.analyzable} valid epochs, pooled CCorr {pooled}"
        )
    for condition, row in report.conditions.items():
        click.echo(f"condition {condition}: mean pooled CCorr {row['mean_pooled_ccorr']:.4f} "
                   f"over {row['n_trials']} trials")
    click.echo(f"wrote {json_path} and {csv_path}")


@main.command()
@click.option("--out", "out_dir", type=click.Path(), required=True, help="Recording directory to create.")
@click.option("--duration", type=float, default=60.0, show_default=True)
@click.option("--coupling", type=float, default=0.7, show_default=True)
@click.option("--band", type=click.Choice(["theta", "alpha", "beta"]), default="alpha", show_default=True)
@click.option("--noise", type=float, default=4.0, show_default=True, help="1/f noise sigma, uV.")
@click.option("--artifact", "artifacts", multiple=True, help="Motion burst START:DURATION:PARTICIPANT (repeatable).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--trial", "trials", multiple=True,
              help="Trial marker CONDITION:START:DURATION (repeatable; default one full-length No Feedback trial).")
def synth(out_dir, duration, coupling, band, noise, artifacts, seed, trials):
    """Emit a synthetic recording (frames plus trial markers)."""
    config = SynthConfig(
        duration_s=duration,
        coupling=coupling,
        carrier_band=band,
        noise_sigma=noise,
        artifact_schedule=_parse_bursts(artifacts),
    )
    result = synthesize(config, seed=seed)
    with Recorder(out_dir, session_id=f"synth-{seed}", config_snapshot={
        "synth": {"duration_s": duration, "coupling": coupling, "band": band,
                  "noise_sigma": noise, "seed": seed}
    }) as recorder:
        for frame in result.frames():
            recorder.add_frame(frame)
        if trials:
            for i, spec in enumerate(trials, start=1):
                try:
                    condition, start, length = spec.split(":")
                    start_us = round(float(start) * 1e6)
                    stop_us = round((float(start) + float(length)) * 1e6)
                except ValueError as exc:
                    raise click.BadParameter(
                        f"trial format is CONDITION:START:DURATION, got {spec!r}") from exc
                recorder.add_marker("trial_start", start_us, condition=condition, trial_id=i)
                recorder.add_marker("trial_stop", stop_us, trial_id=i)
        else:
            recorder.add_marker("trial_start", 0, condition="No Feedback", trial_id=1)
            recorder.add_marker("trial_stop", round(duration * 1e6), trial_id=1)
    click.echo(f"wrote recording to {out_dir}")


@main.command()
@click.option("--updates", type=int, default=200, show_default=True, help="Number of timed metric computations.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Emit machine-readable JSON.")
def bench(updates, seed, as_json):
    """Latency suite over realistic 2 x 14 x 768-sample window pairs."""
    stats = run_bench(n_updates=updates, seed=seed)
    if as_json:
        click.echo(json.dumps(stats, indent=2))
        return
    click.echo(f"{'stage':<10} {'p50 ms':>10} {'p95 ms':>10} {'max ms':>10} {'count':>8}")
    for stage in ("filter", "phase", "ccorr", "pool", "gate", "total"):
        if stage in stats:
            row = stats[stage]
            click.echo(f"{stage:<10} {row['p50']:>10.3f} {row['p95']:>10.3f} "
                       f"{row['max']:>10.3f} {row['count']:>8}")


if __name__ == "__main__":
    main()

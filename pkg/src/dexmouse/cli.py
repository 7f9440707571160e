"""Command-line front door: run sessions, replay/validate/inspect
episodes, batch-retarget tick logs, and dissect raw bus captures."""

from __future__ import annotations

import csv
import json
import sys

import click

from dexmouse.core import NUM_FE_CHANNELS
from dexmouse.streams import PATH_SPECS

_EPISODE_ARG = click.Path(exists=True, dir_okay=False)


@click.group()
def main() -> None:
    """Teleoperation twin: virtual device bus, 100 Hz force-feedback
    loop, retargeting, and demonstration episode tooling."""


# --- run ---------------------------------------------------------------------


def _parse_ff(pairs: tuple[str, ...]) -> dict:
    overrides = {}
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        if not sep:
            raise click.BadParameter(f"--ff expects KEY=VALUE, got {pair!r}")
        try:
            value: float = int(raw)
        except ValueError:
            try:
                value = float(raw)
            except ValueError:
                raise click.BadParameter(f"--ff {key}: {raw!r} is not a number")
        overrides[key] = value
    return overrides


@main.command()
@click.option("--profile", required=True, help="Hand profile (fixture name or JSON path).")
@click.option("--scenario", required=True, help="Scenario (fixture name or JSON path).")
@click.option("--sim-clock", is_flag=True, help="Deterministic simulated clock (no pacing).")
@click.option("--port", type=int, default=None, help="Serve the control API on this port (0 = ephemeral).")
@click.option("--script", "script_path", type=_EPISODE_ARG, default=None,
              help="Scripted commands JSON: {duration_cycles, commands: [{cycle, command}]}.")
@click.option("--cycles", type=int, default=None, help="Stop after this many cycles.")
@click.option("--task", default="freeform", show_default=True)
@click.option("--operator", default="anon", show_default=True)
@click.option("--broadcast-hz", type=int, default=20, show_default=True)
@click.option("--lag-ms", type=float, default=50.0, show_default=True,
              help="Operator input first-order lag time constant.")
@click.option("--pose-seed", type=int, default=0, show_default=True)
@click.option("--pose-path", type=click.Choice(PATH_SPECS), default="static", show_default=True)
@click.option("--ff", "ff_pairs", multiple=True, metavar="KEY=VALUE",
              help="Force-feedback parameter override (repeatable).")
@click.option("--log-dir", default=None, help="Episode output directory (default: $DEXMOUSE_LOG_DIR or cwd).")
def run(profile, scenario, sim_clock, port, script_path, cycles, task, operator,
        broadcast_hz, lag_ms, pose_seed, pose_path, ff_pairs, log_dir) -> None:
    """Run a live session (wall clock by default)."""
    from dexmouse.session import SessionConfig, SessionError, run_session

    script = None
    if script_path is not None:
        with open(script_path, encoding="utf-8") as fh:
            script = json.load(fh)
    config = SessionConfig(
        profile=profile,
        scenario=scenario,
        ff_overrides=_parse_ff(ff_pairs),
        clock="simulated" if sim_clock else "wall",
        duration_cycles=cycles,
        api_port=port,
        state_broadcast_hz=broadcast_hz,
        script=script,
        log_dir=log_dir,
        task=task,
        operator=operator,
        pose_seed=pose_seed,
        pose_path=pose_path,
        operator_lag_ms=lag_ms,
    )

    def announce(server) -> None:
        click.echo(f"listening on ws://127.0.0.1:{server.port}", err=True)

    try:
        report = run_session(config, on_api=announce)
    except SessionError as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(report.to_dict(), indent=2))


# --- episodes ----------------------------------------------------------------


@main.command()
@click.argument("episode", type=_EPISODE_ARG)
def replay(episode) -> None:
    """Re-run an episode's inputs and verify bit-exact outputs."""
    from dexmouse.episodes import EpisodeFormatError
    from dexmouse.episodes import replay as replay_episode

    try:
        report = replay_episode(episode)
    except EpisodeFormatError as exc:
        raise click.ClickException(str(exc))
    if report.ok:
        click.echo(f"ok: {report.cycles} cycles, {report.compared} records compared, 0 divergences")
        return
    first = report.first
    click.echo(
        f"DIVERGED: first at stream={first.stream} t={first.t}\n"
        f"  logged:   {first.logged}\n"
        f"  replayed: {first.replayed}\n"
        f"({len(report.divergences)} divergence(s) reported, {report.compared} records compared)",
        err=True,
    )
    sys.exit(1)


@main.command()
@click.argument("episode", type=_EPISODE_ARG)
def validate(episode) -> None:
    """Check an episode file; prints one line per violation."""
    from dexmouse.episodes import validate as validate_episode

    report = validate_episode(episode)
    for violation in report.violations:
        click.echo(f"{episode}:{violation.line}: {violation.message}", err=True)
    streams = ", ".join(f"{name}={count}" for name, count in sorted(report.records_per_stream.items()))
    click.echo(f"{report.records} records ({streams}); {len(report.violations)} violation(s)")
    if not report.ok:
        sys.exit(1)


@main.command()
@click.argument("episode", type=_EPISODE_ARG)
@click.option("--csv", "as_csv", is_flag=True, help="Machine-readable one-row CSV.")
def stats(episode, as_csv) -> None:
    """Summarize one episode: duration, outcome, stream counts, contact."""
    from dexmouse.episodes import EpisodeFormatError
    from dexmouse.episodes import stats as episode_stats

    try:
        result = episode_stats(episode)
    except EpisodeFormatError as exc:
        raise click.ClickException(str(exc))
    if as_csv:
        click.echo(result.to_csv(), nl=False)
        return
    click.echo(f"duration: {result.duration_s:.2f} s")
    outcome = "unknown" if result.success is None else str(result.success).lower()
    click.echo(f"success: {outcome}")
    if result.completion_time_s is not None:
        click.echo(f"completion: {result.completion_time_s:.2f} s")
    for name, count in sorted(result.records_per_stream.items()):
        click.echo(f"records[{name}]: {count}")
    fractions = " ".join(f"{f:.3f}" for f in result.contact_fraction)
    click.echo(f"contact fraction per channel: {fractions}")
    for flag in result.flags:
        click.echo(f"flag: {flag}")


@main.command()
@click.argument("episode", type=_EPISODE_ARG)
@click.option("--rate", type=int, default=20, show_default=True, help="Grid rate in Hz.")
@click.option("--max-gap-ms", type=int, default=150, show_default=True,
              help="Staleness bound; older samples drop the row.")
@click.option("--output", "-o", type=click.File("w"), default="-")
def align(episode, rate, max_gap_ms, output) -> None:
    """Resample an episode onto a uniform grid and emit training CSV."""
    from dexmouse.episodes import aligned_samples
    from dexmouse.streams import AlignmentError, aligned_to_csv

    try:
        samples, dropped = aligned_samples(episode, rate_hz=rate, max_gap_ms=max_gap_ms)
    except AlignmentError as exc:
        raise click.ClickException(str(exc))
    output.write(aligned_to_csv(samples))
    click.echo(f"{len(samples)} rows, {dropped} dropped", err=True)


# --- retarget ------------------------------------------------------------------


@main.command()
@click.option("--profile", required=True, help="Hand profile (fixture name or JSON path).")
@click.option("--input", "source", type=click.File("r"), default="-",
              help="CSV of device ticks with header t,q0..q5 (t optional).")
@click.option("--output", "-o", type=click.File("w"), default="-")
def retarget(profile, source, output) -> None:
    """Map device tick rows to robot joint angles, row by row."""
    from pathlib import Path

    from dexmouse.assets import profile_path
    from dexmouse.firmware import initial_state
    from dexmouse.retarget import load_profile, retarget_all

    path = Path(profile)
    loaded = load_profile(path if path.exists() else profile_path(profile))

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise click.ClickException("empty input")
    columns = [name.strip() for name in header]
    expected = [f"q{i}" for i in range(NUM_FE_CHANNELS + 1)]
    if columns == ["t"] + expected:
        has_t = True
    elif columns == expected:
        has_t = False
    else:
        raise click.ClickException(
            f"input header must be {','.join(['t'] + expected)} or {','.join(expected)}"
        )

    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(["t"] + list(loaded.joint_ids))
    for index, row in enumerate(reader):
        if not row:
            continue
        try:
            values = [int(cell) for cell in row]
        except ValueError:
            raise click.ClickException(f"row {index + 2}: ticks must be integers, got {row}")
        t = values[0] if has_t else index
        ticks = values[1:] if has_t else values
        if len(ticks) != NUM_FE_CHANNELS + 1:
            raise click.ClickException(f"row {index + 2}: expected 6 tick values, got {len(ticks)}")
        state = initial_state(ticks[:NUM_FE_CHANNELS], ticks[NUM_FE_CHANNELS])
        targets = retarget_all(state, loaded, t=t)
        writer.writerow([t] + [repr(angle) for _, angle in targets.joints])


# --- wire ---------------------------------------------------------------------


@main.group()
def wire() -> None:
    """Bus-capture utilities."""


@wire.command("dump")
@click.argument("hexdata", required=False)
@click.option("--file", "source", type=click.File("r"), default=None,
              help="Read hex from a file instead of the argument.")
def wire_dump(hexdata, source) -> None:
    """Decode a hex byte capture into frames and diagnostics."""
    from dexmouse.wire.frame import Instruction, decode

    if (hexdata is None) == (source is None):
        raise click.UsageError("provide hex bytes as an argument or via --file")
    text = source.read() if source is not None else hexdata
    cleaned = "".join(text.split()).replace(",", "").removeprefix("0x")
    try:
        data = bytes.fromhex(cleaned)
    except ValueError:
        raise click.ClickException("input is not valid hex")

    result = decode(data)
    for frame in result.frames:
        try:
            name = Instruction(frame.instruction).name
        except ValueError:
            name = f"0x{frame.instruction:02x}"
        params = frame.params.hex(" ") if frame.params else "-"
        click.echo(f"frame  id={frame.id:<3} instr={name:<10} params[{len(frame.params)}]: {params}")
    for diag in result.diagnostics:
        detail = []
        if diag.skipped:
            detail.append(f"skipped={diag.skipped}")
        if diag.frame_id is not None:
            detail.append(f"id={diag.frame_id}")
        if diag.expected_crc is not None:
            detail.append(f"expected_crc=0x{diag.expected_crc:04x}")
        if diag.actual_crc is not None:
            detail.append(f"actual_crc=0x{diag.actual_crc:04x}")
        if diag.length is not None:
            detail.append(f"length={diag.length}")
        click.echo(f"diag   {diag.kind.value:<12} offset={diag.offset} {' '.join(detail)}")
    residue = len(data) - result.consumed
    click.echo(
        f"{len(result.frames)} frame(s), {len(result.diagnostics)} diagnostic(s), "
        f"{result.consumed} byte(s) consumed, {residue} residue"
    )


if __name__ == "__main__":
    main()

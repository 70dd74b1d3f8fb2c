import pytest

from flowrag.catalog import Catalog, StepCategory, StepDefinition
from flowrag.datagen import GenSpec, generate_catalog, generate_samples
from flowrag.dense_index import build_index, item_text
from flowrag.encoder import build_vocab, init_model

_ACCEPTANCE_RESULTS: list[tuple[str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): test implementing one acceptance criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        name = marker.args[0] if marker.args else item.name
        _ACCEPTANCE_RESULTS.append((name, report.outcome.upper(), item.nodeid))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, outcome, nodeid in _ACCEPTANCE_RESULTS:
        mark = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line(f"[{mark}] {name}  ({nodeid})")


@pytest.fixture
def tiny_catalog():
    steps = [
        StepDefinition("send_email", StepCategory.ACTION, "send the email to someone"),
        StepDefinition("create_report", StepCategory.ACTION, "create the report now"),
        StepDefinition("update_ticket", StepCategory.ACTION, "update the ticket state"),
        StepDefinition("notify_user", StepCategory.ACTION, "notify the user"),
        StepDefinition("IF", StepCategory.FLOW_LOGIC, "conditional branch"),
        StepDefinition("daily_trigger", StepCategory.TRIGGER, "start daily"),
        StepDefinition("record_trigger", StepCategory.TRIGGER, "start on record", requires_table=True),
    ]
    return Catalog.build(steps, ["incidents", "tickets"], common_steps=("notify_user",))


def build_corpus(seed=11, steps_count=60, tables_count=20, sample_count=80, dim=16):
    """Small synthetic corpus plus an untrained encoder and both indices."""
    spec = GenSpec(
        seed=seed, steps_count=steps_count, tables_count=tables_count, sample_count=sample_count
    )
    catalog = generate_catalog(spec)
    samples = generate_samples(spec, catalog)
    texts = [item_text(catalog, "step", n) for n in catalog.steps]
    texts += [item_text(catalog, "table", n) for n in catalog.tables]
    texts += [s.query for s in samples]
    model = init_model(build_vocab(texts), dim=dim, seed=seed)
    step_index = build_index(model, catalog, "step")
    table_index = build_index(model, catalog, "table")
    return spec, catalog, samples, model, step_index, table_index


@pytest.fixture(scope="session")
def small_corpus():
    return build_corpus()

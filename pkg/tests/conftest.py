from decimal import Decimal

import pytest

from dealbench.catalog import SAMPLE_CATALOG, Category, Product, load_catalog_file


@pytest.fixture
def camry() -> Product:
    return Product("Toyota Camry", Decimal("26995.00"), Decimal("21596.00"),
                   "203-hp mid-size sedan with 8-speed automatic.", "https://www.toyota.com/camry/",
                   Category.MOTOR_VEHICLE)


@pytest.fixture
def widget() -> Product:
    return Product("Widget", Decimal("100.00"), Decimal("60.00"), "A plain widget.")


@pytest.fixture(scope="session")
def sample_products():
    return load_catalog_file(SAMPLE_CATALOG)


def scripted_config_dict(buyers=("alpha", "beta"), sellers=("alpha", "beta"), **overrides) -> dict:
    names = sorted(set(buyers) | set(sellers))
    ladder = {n: {"kind": "scripted", "open_ratio": 0.6 + 0.05 * i, "step_ratio": 0.03 + 0.01 * i}
              for i, n in enumerate(names)}
    d = {"endpoints": ladder, "buyer_models": list(buyers), "seller_models": list(sellers),
         "products_sample": {"count": 4, "seed": 1}, "budget_levels": ["high", "low"], "output_dir": "run"}
    d.update(overrides)
    return d


@pytest.fixture
def make_config(tmp_path):
    """Writes a scripted experiment config into ``tmp_path`` and returns its path."""
    import json

    def build(name="config.json", **kw):
        path = tmp_path / name
        path.write_text(json.dumps(scripted_config_dict(**kw)), encoding="utf-8")
        return path

    return build

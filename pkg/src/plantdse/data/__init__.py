"""Bundled case-study fixtures: DSM, current design, module catalog, scenarios."""

from importlib import resources


def _path(name: str):
    return resources.files(__package__) / name


def case_study_dsm_path():
    return _path("case_study_dsm.json")


def current_design_path():
    return _path("current_design.json")


def catalog_path():
    return _path("catalog.json")


def scenarios_path():
    return _path("scenarios.json")

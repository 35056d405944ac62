import json

import pytest

from wpt_scheduler.config_manager import ConfigManager, packaged_data_path
from wpt_scheduler.exceptions import ConfigError
from wpt_scheduler.policies import PolicyKind


def _write_config(path, config):
    path.write_text(json.dumps(config), encoding="utf-8")


def test_defaults_without_file():
    manager = ConfigManager()

    assert manager.get("topology.n_aps") == 10
    assert manager.get("mdp.T") == 10000
    assert manager.get_policies() == [PolicyKind.MAX_WEIGHT, PolicyKind.MAX_QUEUE,
                                      PolicyKind.MAX_CSI, PolicyKind.RANDOM]
    manager.validate()


def test_defaults_are_not_shared_between_instances():
    first = ConfigManager()
    first.set("experiment.policies", ["random"])
    assert ConfigManager().get("experiment.policies") == ["maxweight", "maxqueue",
                                                          "maxcsi", "random"]


def test_merge_with_defaults_adds_missing_keys():
    manager = ConfigManager()

    merged = manager._merge_with_defaults({
        "mdp": {"T": 50},
        "channels": {"sensor": {"values": [5]}},
        "servers": [],
    })

    assert merged["mdp"]["T"] == 50
    assert merged["mdp"]["N"] == 100
    assert merged["channels"]["sensor"]["values"] == [5]
    assert merged["channels"]["sensor"]["transition"] == "uniform"
    assert "experiment" in merged
    assert "servers" not in merged


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        ConfigManager(str(tmp_path / "missing.json"))

    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        ConfigManager(str(broken))

    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        ConfigManager(str(listing))


def test_relative_topology_file_resolves_next_to_config(tmp_path):
    (tmp_path / "net.json").write_text("{}", encoding="utf-8")
    config_path = tmp_path / "config.json"
    _write_config(config_path, {"topology": {"file": "net.json"}})

    manager = ConfigManager(str(config_path))
    assert manager.get("topology.file") == str(tmp_path / "net.json")


def test_save_and_reload(tmp_path):
    config_path = tmp_path / "config.json"
    _write_config(config_path, {"experiment": {"seed": 3}})
    manager = ConfigManager(str(config_path))

    manager.set("mdp.N", 7)
    assert manager.save_config() is True
    assert (tmp_path / "config.json.backup").exists()
    assert not (tmp_path / "config.json.tmp").exists()

    reloaded = ConfigManager(str(config_path))
    assert reloaded.get("mdp.N") == 7
    assert reloaded.get_seed() == 3


def test_save_without_path_fails(capsys):
    assert ConfigManager().save_config() is False
    assert "Error saving config" in capsys.readouterr().out


def test_validate_lists_every_problem():
    manager = ConfigManager()
    manager.set("topology.edge_prob", 1.5)
    manager.set("mdp.N", 0)
    manager.set("experiment.policies", ["maxweight", "roundrobin"])

    with pytest.raises(ConfigError) as info:
        manager.validate()
    message = str(info.value)
    assert "topology.edge_prob" in message
    assert "mdp.N" in message
    assert "roundrobin" in message


def test_validate_rejects_bad_matrices_and_weights():
    manager = ConfigManager()
    manager.set("channels.sensor.transition", [[1.0]])
    manager.set("mdp.gamma_d", 0)
    manager.set("mdp.gamma_e", 0)
    with pytest.raises(ConfigError) as info:
        manager.validate()
    assert "channels.sensor.transition" in str(info.value)
    assert "cannot both be zero" in str(info.value)


def test_validate_wrong_types_become_config_errors():
    manager = ConfigManager()
    manager.set("topology.n_aps", "many")
    with pytest.raises(ConfigError):
        manager.validate()


def test_horizon_below_depth_rejected():
    manager = ConfigManager()
    manager.set("mdp.T", 2)
    manager.set("mdp.H", 3)
    with pytest.raises(ConfigError):
        manager.validate()


def test_quick_profile_and_overrides():
    manager = ConfigManager()
    manager.apply_quick_profile()
    manager.override("experiment", "seed", 42)

    assert manager.get("topology.n_aps") == 4
    assert manager.get("topology.edge_prob") == 0.3
    assert manager.get("mdp.T") == 2000
    assert manager.get_runs() == 5
    assert manager.get_seed() == 42


def test_typed_accessors():
    manager = ConfigManager()
    manager.set("mdp.gamma_e", 0.5)
    cfg = manager.get_mdp_config()

    assert cfg.horizon == 10000
    assert cfg.samples == 100
    assert cfg.weights.energy == 0.5
    assert manager.get_arrival_sweep()[0] == 0.1
    assert manager.get_interference_sweep()[-1] == 1.0
    assert manager.get_horizons() == [1, 2, 4, 6, 8, 10]
    assert manager.get("no.such.key", "fallback") == "fallback"


def test_packaged_small_scenario_is_valid():
    manager = ConfigManager(packaged_data_path("small_scenario.json"))
    manager.validate()

    assert manager.get("dynamics.q_max") == 2
    assert manager.get("arrivals.pmf") == [0.6, 0.3, 0.1]
    assert manager.get("topology.file").endswith("small_topology.json")

import pytest

from smstrack.errors import ConfigError
from smstrack.service.auth import TokenAuth
from smstrack.service.config import load_config


class TestConfigFile:
    def test_defaults_with_no_file(self):
        config = load_config(None, env={})
        assert config.listen_port == 8000
        assert config.transport == "none"

    def test_file_values_parsed(self, tmp_path):
        path = tmp_path / "server.conf"
        path.write_text(
            "# comment\n"
            "listen_port = 9001\n"
            "store_path = /tmp/x\n"
            "timezone = Asia/Kuala_Lumpur\n")
        config = load_config(str(path), env={})
        assert config.listen_port == 9001
        assert config.store_path == "/tmp/x"
        assert config.timezone == "Asia/Kuala_Lumpur"

    def test_env_overrides_file(self, tmp_path):
        path = tmp_path / "server.conf"
        path.write_text("listen_port = 9001\n")
        config = load_config(str(path), env={"SMSTRACK_LISTEN_PORT": "9002"})
        assert config.listen_port == 9002

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "server.conf"
        path.write_text("listen_prot = 9001\n")
        with pytest.raises(ConfigError):
            load_config(str(path), env={})

    def test_bad_number_rejected(self, tmp_path):
        path = tmp_path / "server.conf"
        path.write_text("listen_port = lots\n")
        with pytest.raises(ConfigError):
            load_config(str(path), env={})

    def test_http_transport_requires_url(self, tmp_path):
        path = tmp_path / "server.conf"
        path.write_text("transport = http\n")
        with pytest.raises(ConfigError) as err:
            load_config(str(path), env={})
        assert "transport_url" in err.value.location

    def test_loopback_requires_scenario(self, tmp_path):
        path = tmp_path / "server.conf"
        path.write_text("transport = loopback\n")
        with pytest.raises(ConfigError):
            load_config(str(path), env={})


class TestTokenAuth:
    def test_roles_from_file(self, tmp_path):
        path = tmp_path / "tokens.txt"
        path.write_text("# ops team\nabc admin\nxyz viewer\n\n")
        auth = TokenAuth.from_file(str(path))
        assert auth.role_for("abc") == "admin"
        assert auth.role_for("xyz") == "viewer"
        assert auth.role_for("nope") is None
        assert auth.role_for(None) is None

    def test_unknown_role_rejected(self, tmp_path):
        path = tmp_path / "tokens.txt"
        path.write_text("abc root\n")
        with pytest.raises(ValueError):
            TokenAuth.from_file(str(path))

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "tokens.txt"
        path.write_text("justatoken\n")
        with pytest.raises(ValueError):
            TokenAuth.from_file(str(path))

    def test_open_access_mode(self):
        auth = TokenAuth.open_access()
        assert auth.role_for(None) == "admin"

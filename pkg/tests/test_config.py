import json

import pytest

from snnaccel.core import ConfigError, ConvMode
from snnaccel.netconfig import NetworkConfig, config_from_dict, parse_config


class TestModelStringGrammar:
    def test_scnn3_tail(self):
        cfg = parse_config("28x28x16 32c3-p2-32c3-p2-fc10",
                           encode_first_conv=False)
        modes = [l.mode for l in cfg.layers]
        assert modes == [ConvMode.STANDARD, ConvMode.POOL, ConvMode.STANDARD,
                         ConvMode.POOL, ConvMode.FULLY_CONNECTED]
        shapes = cfg.layer_shapes()
        assert shapes[0] == (28, 28, 16)
        assert shapes[1] == (28, 28, 32)   # same-padded conv
        assert shapes[2] == (14, 14, 32)
        assert shapes[4] == (7, 7, 32)
        assert shapes[5] == (1, 1, 10)
        fc = cfg.layers[-1]
        assert (fc.k_h, fc.k_w, fc.c_in, fc.c_out) == (7, 7, 32, 10)

    def test_full_scnn3(self):
        cfg = parse_config("28x28 16c3-32c3-p2-32c3-p2-fc")
        assert cfg.input_channels == 1
        assert cfg.encoder is cfg.layers[0]
        assert len(cfg.pipeline_layers) == 5
        assert cfg.layers[-1].c_out == 10  # fc classes default

    def test_separable_block_expands_to_two_layers(self):
        cfg = parse_config("8x8x16 16dwc3/32c1-fc4", encode_first_conv=False)
        assert [l.mode for l in cfg.layers] == [
            ConvMode.DEPTHWISE, ConvMode.POINTWISE, ConvMode.FULLY_CONNECTED]
        dw, pw, _ = cfg.layers
        assert (dw.c_in, dw.c_out, dw.k_h) == (16, 16, 3)
        assert (pw.c_in, pw.c_out, pw.k_h) == (16, 32, 1)

    def test_vmobilenet_chain(self):
        cfg = parse_config(
            "28x28 16c3-16dwc3/32c1-32dwc3/64c1-64dwc3/64c1-64dwc3/128c1-fc")
        assert len(cfg.layers) == 10
        assert cfg.layer_shapes()[-1] == (1, 1, 10)
        modes = [l.mode.value for l in cfg.pipeline_layers]
        assert modes == ["depthwise", "pointwise"] * 4 + ["fc"]

    def test_pool_divisibility_error(self):
        with pytest.raises(ConfigError, match="pool"):
            parse_config("7x7x4 p3-fc", encode_first_conv=False)

    def test_depthwise_channel_mismatch_names_layer(self):
        with pytest.raises(ConfigError, match="layer 0"):
            parse_config("8x8x4 8dwc3-fc", encode_first_conv=False)

    def test_unparseable_token(self):
        with pytest.raises(ConfigError, match="unparseable"):
            parse_config("8x8 16q3-fc")

    def test_bad_dims(self):
        with pytest.raises(ConfigError):
            parse_config("28by28 16c3-fc")


class TestJsonConfig:
    DOC = {
        "input": {"height": 28, "width": 28, "channels": 1},
        "timesteps": 2,
        "encode_first_conv": True,
        "arch": "16c3-32c3-p2-32c3-p2-fc10",
        "defaults": {"threshold": 32, "leak": 0.5, "vmem_width": 16},
        "latency": {"t_rw": 1, "t_pe": 2, "t_pes": 3},
        "energy": {"e_acc": 0.5, "e_read": {"input": 1, "weight": 2, "psum": 4},
                   "p_static": 0.1},
        "parallel_factors": [4, 2],
    }

    def test_roundtrip_fields(self):
        cfg = config_from_dict(self.DOC)
        assert cfg.timesteps == 2
        assert cfg.layers[0].threshold == 32
        assert cfg.layers[0].leak == 0.5
        assert cfg.layers[0].vmem_width == 16
        assert cfg.latency.t_pes == 3
        assert cfg.energy.e_read["psum"] == 4
        assert cfg.conv_parallel_factors() == [4, 2]

    def test_parse_config_accepts_json_text(self):
        cfg = parse_config(json.dumps(self.DOC))
        assert cfg.input_height == 28

    def test_missing_key(self):
        with pytest.raises(ConfigError, match="input"):
            config_from_dict({"arch": "fc"})

    def test_wrong_parallel_factor_count(self):
        doc = dict(self.DOC)
        doc["parallel_factors"] = [4, 2, 1]
        with pytest.raises(ConfigError, match="parallel"):
            config_from_dict(doc)


class TestNetworkConfig:
    def test_encoder_must_be_standard_conv(self):
        with pytest.raises(ConfigError):
            parse_config("8x8x4 p2-fc", encode_first_conv=True)

    def test_conv_layers_excludes_encoder(self):
        cfg = parse_config("28x28 16c3-32c3-p2-32c3-p2-fc")
        geos = cfg.conv_layers()
        assert len(geos) == 2
        assert geos[0][1].c_in == 16
        with_enc = cfg.conv_layers(include_encoder=True)
        assert len(with_enc) == 3

    def test_scnn5_geometries(self):
        cfg = parse_config("32x32x3 64c3-p2-128c3-p2-256c3-p2-256c3-p2-512c3-p2-fc")
        geos = [g for _, g in cfg.conv_layers()]
        assert [(g.c_in, g.c_out, g.h_out) for g in geos] == [
            (64, 128, 16), (128, 256, 8), (256, 256, 4), (256, 512, 2)]

    def test_timesteps_validated(self):
        with pytest.raises(ConfigError):
            NetworkConfig(8, 8, 1, 0, [], encode_first_conv=False)

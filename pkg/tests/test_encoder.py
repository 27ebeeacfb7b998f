import numpy as np
import pytest

from nliattn import autodiff as ad
from nliattn import encoder as enc
from nliattn import gradcheck as gc
from nliattn.autodiff import Parameter, Tensor
from nliattn.errors import ConfigError, DataError, InvalidInputError


# -- independent oracle: the gate formulas evaluated directly in float64 ----


def np_sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def np_lstm_step(w_ih, w_hh, bias, x, h_prev, c_prev):
    h = h_prev.shape[0]
    gates = w_ih @ x + w_hh @ h_prev + bias
    i = np_sigmoid(gates[:h])
    f = np_sigmoid(gates[h : 2 * h])
    g = np.tanh(gates[2 * h : 3 * h])
    o = np_sigmoid(gates[3 * h :])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def make_cell(name, d_in, hidden, rng):
    return enc.LSTMCellParams(name, d_in, hidden, rng)


def tiny_encoder(use_chars=False, word_dim=5, hidden=3, n_vocab=9, n_chars=7, seed=0):
    rng = np.random.default_rng(seed)
    config = enc.EncoderConfig(
        use_chars=use_chars,
        word_dim=word_dim,
        char_dim=2,
        char_hidden=2,
        hidden_per_dir=hidden,
    )
    matrix = rng.uniform(-0.5, 0.5, (n_vocab, word_dim)).astype(np.float32)
    matrix[0] = 0.0
    embeddings = Parameter(matrix, name="word_embeddings", trainable=False)
    return enc.Encoder(config, embeddings, n_chars=n_chars, rng=rng)


class TestLstmStep:
    def test_zero_params_zero_state(self):
        rng = np.random.default_rng(0)
        cell = make_cell("z", 4, 3, rng)
        for p in cell.parameters().values():
            p.value.data[:] = 0.0
        h, c = enc.lstm_step(cell, Tensor(rng.normal(size=4)), ad.zeros(3), ad.zeros(3))
        np.testing.assert_array_equal(h.data, np.zeros(3, dtype=np.float32))
        np.testing.assert_array_equal(c.data, np.zeros(3, dtype=np.float32))

    def test_gate_saturation_carries_cell_state(self):
        rng = np.random.default_rng(1)
        cell = make_cell("s", 2, 3, rng)
        cell.w_ih.value.data[:] = 0.0
        cell.w_hh.value.data[:] = 0.0
        bias = np.full(12, -50.0, dtype=np.float32)
        bias[3:6] = 50.0  # forget slots
        cell.bias.value.data[:] = bias
        c_prev = Tensor(np.array([0.3, -0.7, 1.1]))
        h, c = enc.lstm_step(cell, Tensor(np.ones(2)), ad.zeros(3), c_prev)
        np.testing.assert_allclose(c.data, c_prev.data, atol=1e-6)
        np.testing.assert_allclose(h.data, np.zeros(3), atol=1e-6)

    def test_matches_direct_formula(self):
        with ad.precision("float64"):
            rng = np.random.default_rng(2)
            cell = make_cell("r", 2, 3, rng)
            x = rng.normal(size=2)
            h0 = rng.normal(size=3)
            c0 = rng.normal(size=3)
            h, c = enc.lstm_step(cell, Tensor(x), Tensor(h0), Tensor(c0))
            exp_h, exp_c = np_lstm_step(
                cell.w_ih.data, cell.w_hh.data, cell.bias.data, x, h0, c0
            )
        np.testing.assert_allclose(h.data, exp_h, atol=1e-6)
        np.testing.assert_allclose(c.data, exp_c, atol=1e-6)

    def test_forget_bias_initialized_to_one(self):
        cell = make_cell("b", 2, 4, np.random.default_rng(3))
        np.testing.assert_array_equal(cell.bias.data[4:8], np.ones(4, dtype=np.float32))
        np.testing.assert_array_equal(cell.bias.data[:4], np.zeros(4, dtype=np.float32))


class TestCharEncode:
    def _char_model(self, rng):
        emb = Parameter(rng.uniform(-0.5, 0.5, (6, 2)), name="char_embeddings")
        cell = make_cell("char", 2, 2, rng)
        return emb, cell

    def test_single_char_equals_one_step(self):
        rng = np.random.default_rng(4)
        emb, cell = self._char_model(rng)
        out = enc.char_encode([3], emb, cell)
        expected, _ = enc.lstm_step(cell, Tensor(emb.data[3]), ad.zeros(2), ad.zeros(2))
        np.testing.assert_array_equal(out.data, expected.data)

    def test_purity(self):
        rng = np.random.default_rng(5)
        emb, cell = self._char_model(rng)
        a = enc.char_encode([1, 2, 3], emb, cell)
        b = enc.char_encode([1, 2, 3], emb, cell)
        np.testing.assert_array_equal(a.data, b.data)

    def test_matches_manual_unroll(self):
        with ad.precision("float64"):
            rng = np.random.default_rng(6)
            emb, cell = self._char_model(rng)
            ids = [2, 0, 4]  # "cat" as char ids
            out = enc.char_encode(ids, emb, cell)
            h = np.zeros(2)
            c = np.zeros(2)
            for i in ids:
                h, c = np_lstm_step(cell.w_ih.data, cell.w_hh.data, cell.bias.data, emb.data[i], h, c)
        np.testing.assert_allclose(out.data, h, atol=1e-6)

    def test_empty_word_rejected(self):
        rng = np.random.default_rng(7)
        emb, cell = self._char_model(rng)
        with pytest.raises(DataError):
            enc.char_encode([], emb, cell)


class TestEmbedTokens:
    def test_lookup_without_chars(self):
        model = tiny_encoder(use_chars=False)
        ids = np.array([2, 5, 2])
        out = model.embed_tokens(ids)
        np.testing.assert_array_equal(out.data, model.word_embeddings.data[ids])

    def test_word_half_matches_lookup_with_chars(self):
        model = tiny_encoder(use_chars=True)
        ids = np.array([3, 4])
        char_ids = np.array([[1, 2, 0], [3, 0, 0]])
        char_mask = np.array([[True, True, False], [True, False, False]])
        out = model.embed_tokens(ids, None, char_ids, char_mask)
        np.testing.assert_array_equal(out.data[:, :5], model.word_embeddings.data[ids])
        assert out.shape == (2, 5 + 2)

    def test_pad_row_is_zero_both_halves(self):
        model = tiny_encoder(use_chars=True)
        ids = np.array([3, 0])
        mask = np.array([True, False])
        char_ids = np.zeros((2, 2), dtype=np.int64)
        char_ids[0] = [1, 2]
        char_mask = np.array([[True, True], [False, False]])
        out = model.embed_tokens(ids, mask, char_ids, char_mask)
        np.testing.assert_array_equal(out.data[1], np.zeros(7, dtype=np.float32))

    def test_out_of_range_id_rejected(self):
        model = tiny_encoder()
        with pytest.raises(InvalidInputError):
            model.embed_tokens(np.array([99]))


class TestBilstm:
    def test_single_position(self):
        model = tiny_encoder()
        x = Tensor(np.random.default_rng(8).normal(size=(1, 5)))
        seq = enc.bilstm(x, None, model.forward_cell, model.backward_cell)
        x0 = ad.reshape(ad.narrow(x, 0, 0, 1), (5,))
        fh, _ = enc.lstm_step(model.forward_cell, x0, ad.zeros(3), ad.zeros(3))
        bh, _ = enc.lstm_step(model.backward_cell, x0, ad.zeros(3), ad.zeros(3))
        np.testing.assert_array_equal(seq.H.data[0], np.concatenate([fh.data, bh.data]))

    def test_reversal_symmetry_with_tied_weights(self):
        # oracle: with tied cells, the forward pass over a sequence equals the
        # backward pass over its reversal
        model = tiny_encoder(seed=9)
        for name in ("w_ih", "w_hh", "bias"):
            getattr(model.backward_cell, name).value.data[:] = getattr(
                model.forward_cell, name
            ).value.data
        x = np.random.default_rng(10).normal(size=(3, 5)).astype(np.float32)
        seq = enc.bilstm(Tensor(x), None, model.forward_cell, model.backward_cell)
        seq_rev = enc.bilstm(Tensor(x[::-1]), None, model.forward_cell, model.backward_cell)
        h = model.forward_cell.hidden
        for i in range(3):
            np.testing.assert_allclose(
                seq.H.data[i, :h], seq_rev.H.data[2 - i, h:], atol=1e-6
            )

    def test_padding_neutrality(self):
        model = tiny_encoder(seed=11)
        x_real = np.random.default_rng(12).normal(size=(3, 5)).astype(np.float32)
        x_padded = np.vstack([x_real, np.zeros((2, 5), dtype=np.float32)])
        mask = np.array([True, True, True, False, False])
        plain = enc.bilstm(Tensor(x_real), None, model.forward_cell, model.backward_cell)
        padded = enc.bilstm(Tensor(x_padded), mask, model.forward_cell, model.backward_cell)
        np.testing.assert_array_equal(plain.H.data, padded.H.data[:3])
        np.testing.assert_array_equal(padded.H.data[3:], 0.0)
        np.testing.assert_array_equal(plain.final_forward.data, padded.final_forward.data)
        np.testing.assert_array_equal(plain.final_backward.data, padded.final_backward.data)

    def test_all_masked_rejected(self):
        model = tiny_encoder()
        with pytest.raises(InvalidInputError):
            enc.bilstm(
                Tensor(np.zeros((2, 5))),
                np.array([False, False]),
                model.forward_cell,
                model.backward_cell,
            )


class TestPool:
    def _seq(self, n=4, seed=13, mask=None):
        model = tiny_encoder(seed=seed)
        x = Tensor(np.random.default_rng(seed).normal(size=(n, 5)).astype(np.float32))
        return enc.bilstm(x, mask, model.forward_cell, model.backward_cell)

    def test_length_one_all_methods_agree(self):
        seq = self._seq(n=1)
        outputs = [enc.pool(seq, m).data for m in enc.POOLING_METHODS]
        for out in outputs[1:]:
            np.testing.assert_allclose(out, outputs[0], atol=1e-7)
        np.testing.assert_allclose(outputs[0], seq.H.data[0], atol=1e-7)

    def test_mean_times_length_equals_sum(self):
        seq = self._seq(n=5)
        mean = enc.pool(seq, "mean").data
        total = enc.pool(seq, "sum").data
        np.testing.assert_allclose(mean * 5, total, atol=1e-5)

    def test_masked_rows_match_truncation_oracle(self):
        model = tiny_encoder(seed=14)
        x_real = np.random.default_rng(15).normal(size=(3, 5)).astype(np.float32)
        x_padded = np.vstack([x_real, np.zeros((1, 5), dtype=np.float32)])
        mask = np.array([True, True, True, False])
        seq_full = enc.bilstm(Tensor(x_padded), mask, model.forward_cell, model.backward_cell)
        seq_trunc = enc.bilstm(Tensor(x_real), None, model.forward_cell, model.backward_cell)
        for method in enc.POOLING_METHODS:
            np.testing.assert_allclose(
                enc.pool(seq_full, method).data,
                enc.pool(seq_trunc, method).data,
                atol=1e-6,
            )

    def test_last_concatenates_directional_finals(self):
        seq = self._seq(n=3)
        out = enc.pool(seq, "last")
        np.testing.assert_array_equal(
            out.data, np.concatenate([seq.final_forward.data, seq.final_backward.data])
        )

    def test_unknown_method_rejected(self):
        seq = self._seq(n=2)
        with pytest.raises(ConfigError):
            enc.pool(seq, "median")


class TestInnerAttention:
    def test_zero_v_collapses_to_mean(self):
        model = tiny_encoder(seed=16)
        model.attention_v.value.data[:] = 0.0
        seq = self._random_seq(model, 4)
        raw = enc.pool(seq, "mean")
        refined, alpha = enc.inner_attention(seq, raw, model.attention_w, model.attention_v)
        np.testing.assert_allclose(alpha.data, np.full(4, 0.25), atol=1e-6)
        np.testing.assert_allclose(refined.data, ad.reduce_mean(seq.H, seq.mask).data, atol=1e-5)

    def test_length_one_degenerate(self):
        model = tiny_encoder(seed=17)
        seq = self._random_seq(model, 1)
        raw = enc.pool(seq, "max")
        refined, alpha = enc.inner_attention(seq, raw, model.attention_w, model.attention_v)
        np.testing.assert_allclose(alpha.data, [1.0], atol=1e-7)
        np.testing.assert_allclose(refined.data, seq.H.data[0], atol=1e-6)

    def test_matches_direct_formula(self):
        # oracle: score/softmax/weighted-sum evaluated directly in float64
        with ad.precision("float64"):
            model = tiny_encoder(seed=18, hidden=2)
            rng = np.random.default_rng(19)
            model.attention_w.value.data[:] = rng.normal(size=model.attention_w.shape)
            model.attention_v.value.data[:] = rng.normal(size=model.attention_v.shape)
            seq = self._random_seq(model, 3)
            raw = enc.pool(seq, "mean")
            refined, alpha = enc.inner_attention(
                seq, raw, model.attention_w, model.attention_v
            )
            H, W, v = seq.H.data, model.attention_w.data, model.attention_v.data
            u = np.array([v @ np.tanh(W @ np.concatenate([raw.data, H[i]])) for i in range(3)])
            e = np.exp(u - u.max())
            a = e / e.sum()
            expected = (a[:, None] * H).sum(axis=0)
        np.testing.assert_allclose(alpha.data, a, atol=1e-6)
        np.testing.assert_allclose(refined.data, expected, atol=1e-6)

    def test_refined_inside_convex_hull(self):
        model = tiny_encoder(seed=20)
        rng = np.random.default_rng(21)
        model.attention_v.value.data[:] = rng.normal(size=model.attention_v.shape)
        for n in (1, 2, 5, 9):
            seq = self._random_seq(model, n)
            raw = enc.pool(seq, "mean")
            refined, _ = enc.inner_attention(seq, raw, model.attention_w, model.attention_v)
            lo = seq.H.data.min(axis=0)
            hi = seq.H.data.max(axis=0)
            assert np.all(refined.data >= lo - 1e-6)
            assert np.all(refined.data <= hi + 1e-6)

    @staticmethod
    def _random_seq(model, n, seed=22):
        x = Tensor(
            np.random.default_rng(seed + n).normal(size=(n, 5)).astype(np.float32)
        )
        return enc.bilstm(x, None, model.forward_cell, model.backward_cell)


class TestEncodeSentence:
    def test_purity(self):
        model = tiny_encoder(use_chars=False)
        ids = np.array([2, 3, 4])
        a = model.encode_sentence(ids, "mean")
        b = model.encode_sentence(ids, "mean")
        np.testing.assert_array_equal(a.refined.data, b.refined.data)
        np.testing.assert_array_equal(a.raw.data, b.raw.data)

    def test_swapping_sentences_swaps_representations(self):
        model = tiny_encoder()
        p = np.array([2, 3])
        h = np.array([4, 5, 6])
        first = (model.encode_sentence(p, "mean").refined.data,
                 model.encode_sentence(h, "mean").refined.data)
        swapped = (model.encode_sentence(h, "mean").refined.data,
                   model.encode_sentence(p, "mean").refined.data)
        np.testing.assert_array_equal(first[0], swapped[1])
        np.testing.assert_array_equal(first[1], swapped[0])

    def test_padding_neutrality_end_to_end(self):
        model = tiny_encoder(seed=23)
        ids = np.array([2, 3, 4])
        plain = model.encode_sentence(ids, "mean")
        padded_ids = np.array([2, 3, 4, 0, 0])
        mask = np.array([True, True, True, False, False])
        padded = model.encode_sentence(padded_ids, "mean", mask=mask)
        np.testing.assert_allclose(plain.raw.data, padded.raw.data, atol=1e-6)
        np.testing.assert_allclose(plain.refined.data, padded.refined.data, atol=1e-6)
        np.testing.assert_allclose(
            plain.attention_weights.data, padded.attention_weights.data[:3], atol=1e-6
        )
        np.testing.assert_array_equal(padded.attention_weights.data[3:], 0.0)

    def test_full_scale_dimensions(self):
        rng = np.random.default_rng(24)
        with_chars = enc.EncoderConfig(use_chars=True)
        assert with_chars.rep_dim == 700
        assert with_chars.attention_dim == 1400
        without = enc.EncoderConfig(use_chars=False)
        assert without.rep_dim == 600

        emb = Parameter(
            rng.uniform(-0.05, 0.05, (12, 300)).astype(np.float32),
            name="word_embeddings",
            trainable=False,
        )
        model = enc.Encoder(with_chars, emb, n_chars=8, rng=rng)
        assert model.attention_w.shape == (1400, 1400)
        assert model.attention_v.shape == (1400,)
        char_ids = np.array([[1, 2], [3, 0]])
        char_mask = np.array([[True, True], [True, False]])
        rep = model.encode_sentence(
            np.array([2, 3]), "mean", char_ids=char_ids, char_mask=char_mask
        )
        assert rep.refined.shape == (700,)

        model_nc = enc.Encoder(without, emb, n_chars=8, rng=rng)
        rep = model_nc.encode_sentence(np.array([2, 3]), "mean")
        assert rep.refined.shape == (600,)


class TestEncoderGradients:
    def test_finite_difference_flow_through_all_parameters(self):
        with ad.precision("float64"):
            model = tiny_encoder(use_chars=True, word_dim=3, hidden=2, seed=25)
            # healthy magnitudes so the finite differences resolve every weight
            rng = np.random.default_rng(26)
            for p in model.parameters().values():
                if p.trainable:
                    p.value.data[:] = rng.uniform(-0.6, 0.6, p.shape)
            ids = np.array([2, 3, 4])
            char_ids = np.array([[1, 2], [3, 0], [2, 2]])
            char_mask = np.array([[True, True], [True, False], [True, True]])
            weights = ad.Tensor(rng.normal(size=4))

            def loss():
                rep = model.encode_sentence(
                    ids, "mean", char_ids=char_ids, char_mask=char_mask
                )
                return ad.sum_all(ad.mul(rep.refined, weights))

            errors = gc.parameter_gradient_errors(loss, model.parameters())
        assert errors, "no trainable parameters checked"
        for name, err in errors.items():
            assert err <= 1e-3, f"{name}: relative error {err:.3e}"

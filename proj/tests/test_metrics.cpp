#include <doctest.h>

#include <cmath>

#include "hyperaod/metrics.hpp"
#include "test_util.hpp"

using namespace hyperaod;

namespace {

// independent brute-force reference for the pooled metric definitions
MetricsReport loop_reference(const std::vector<double>& p, const std::vector<double>& o) {
    MetricsReport r;
    r.n_valid = p.size();
    double se = 0.0, bias = 0.0, om = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        se += (p[i] - o[i]) * (p[i] - o[i]);
        bias += p[i] - o[i];
        om += o[i];
    }
    om /= static_cast<double>(o.size());
    r.mse = se / static_cast<double>(p.size());
    r.rmse = std::sqrt(r.mse);
    r.mbe = bias / static_cast<double>(p.size());
    double den = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double t = std::abs(p[i] - om) + std::abs(o[i] - om);
        den += t * t;
    }
    r.ioa = den == 0.0 ? (se == 0.0 ? 1.0 : 0.0) : 1.0 - se / den;
    return r;
}

AODField field_of(const std::vector<float>& v, const std::vector<std::uint8_t>& m) {
    AODField f;
    f.values = ArrayF({1, v.size()});
    f.values.data = v;
    f.valid = MaskGrid({1, m.size()});
    f.valid.data = m;
    return f;
}

}  // namespace

TEST_CASE("metrics: perfect agreement") {
    const AODField a = field_of({0.1f, 0.5f, 1.2f}, {1, 1, 1});
    const MetricsReport r = compute_metrics(a, a, "perfect");
    CHECK(r.mse == 0.0);
    CHECK(r.rmse == 0.0);
    CHECK(r.mbe == 0.0);
    CHECK(r.ioa == 1.0);
    CHECK(r.n_valid == 3);
}

TEST_CASE("metrics: hand-evaluated constant-vs-ramp case") {
    const AODField p = field_of({2.0f, 2.0f, 2.0f}, {1, 1, 1});
    const AODField o = field_of({1.0f, 2.0f, 3.0f}, {1, 1, 1});
    const MetricsReport r = compute_metrics(p, o, "hand");
    CHECK(r.mse == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(r.mbe == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(r.ioa == 0.0);  // 1 - 2/2, exactly
}

TEST_CASE("metrics: published reference row is internally consistent") {
    // sanity on the definition: rmse^2 == mse at reporting precision
    const double mse = 0.0141, rmse = 0.1186, ioa = 0.8552;
    CHECK(std::abs(std::sqrt(mse) - rmse) < 5e-4);
    CHECK(ioa >= 0.0);
    CHECK(ioa <= 1.0);
}

TEST_CASE("metrics: pooled computation matches the brute-force loop") {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        MetricsAccumulator acc;
        std::vector<double> pv, ov;
        for (int field = 0; field < 3; ++field) {
            const std::size_t n = 20 + rng.index(40);
            std::vector<float> p(n), o(n);
            std::vector<std::uint8_t> m(n);
            for (std::size_t i = 0; i < n; ++i) {
                p[i] = static_cast<float>(rng.normal());
                o[i] = static_cast<float>(rng.normal());
                m[i] = rng.uniform() < 0.7 ? 1 : 0;
                if (m[i]) {
                    pv.push_back(p[i]);
                    ov.push_back(o[i]);
                }
            }
            acc.add(field_of(p, m), field_of(o, m));
        }
        if (pv.empty()) continue;
        const MetricsReport got = acc.compute("x");
        const MetricsReport want = loop_reference(pv, ov);
        CHECK(std::abs(got.mse - want.mse) < 1e-10);
        CHECK(std::abs(got.rmse - want.rmse) < 1e-10);
        CHECK(std::abs(got.mbe - want.mbe) < 1e-10);
        CHECK(std::abs(got.ioa - want.ioa) < 1e-10);
        CHECK(got.n_valid == want.n_valid);
        CHECK(got.rmse * got.rmse == doctest::Approx(got.mse).epsilon(1e-12));
        CHECK(got.ioa >= 0.0);
        CHECK(got.ioa <= 1.0);
    }
}

TEST_CASE("metrics: IOA invariances and the MBE shift law") {
    Rng rng(13);
    MetricsAccumulator base;
    std::vector<double> p, o;
    for (int i = 0; i < 200; ++i) {
        p.push_back(rng.normal() + 0.4);
        o.push_back(rng.normal() * 0.8);
        base.add_pair(p.back(), o.back());
    }
    const MetricsReport r0 = base.compute("base");

    for (double c : {0.7, -1.3}) {
        MetricsAccumulator shifted;
        for (std::size_t i = 0; i < p.size(); ++i) shifted.add_pair(p[i] + c, o[i] + c);
        CHECK(std::abs(shifted.compute("s").ioa - r0.ioa) < 1e-12);

        MetricsAccumulator pred_shift;
        for (std::size_t i = 0; i < p.size(); ++i) pred_shift.add_pair(p[i] + c, o[i]);
        CHECK(pred_shift.compute("m").mbe == doctest::Approx(r0.mbe + c).epsilon(1e-12));
    }
    for (double k : {2.0, 0.25}) {
        MetricsAccumulator scaled;
        for (std::size_t i = 0; i < p.size(); ++i) scaled.add_pair(k * p[i], k * o[i]);
        CHECK(std::abs(scaled.compute("k").ioa - r0.ioa) < 1e-12);
    }
}

TEST_CASE("metrics: degenerate IOA rule and the empty error") {
    MetricsAccumulator constant;
    constant.add_pair(0.5, 0.5);
    constant.add_pair(0.5, 0.5);
    CHECK(constant.compute("c").ioa == 1.0);

    MetricsAccumulator empty;
    CHECK_THROWS_AS(empty.compute("e"), DataError);
}

TEST_CASE("export_table: best flags, |MBE| selection, JSON round trip") {
    MetricsReport a;
    a.model_name = "DNN_8w";
    a.mse = 0.0441;
    a.rmse = 0.2099;
    a.mbe = -0.0800;
    a.ioa = 0.3496;
    a.n_valid = 1000;
    MetricsReport b;
    b.model_name = "ViTCG";
    b.mse = 0.0141;
    b.rmse = 0.1186;
    b.mbe = 0.0008;
    b.ioa = 0.8552;
    b.n_valid = 1000;

    const TableExport t = export_table({a, b});
    CHECK(t.json["best"]["mse"] == "ViTCG");
    CHECK(t.json["best"]["rmse"] == "ViTCG");
    CHECK(t.json["best"]["mbe"] == "ViTCG");  // |0.0008| beats |-0.08|
    CHECK(t.json["best"]["ioa"] == "ViTCG");
    CHECK(t.markdown.find("**0.0141**") != std::string::npos);
    CHECK(t.markdown.find("| DNN_8w |") != std::string::npos);
    CHECK(t.markdown.find("MSE") != std::string::npos);

    const auto rt = reports_from_json(t.json);
    REQUIRE(rt.size() == 2);
    CHECK(rt[1].mse == b.mse);
    CHECK(rt[1].mbe == b.mbe);
    CHECK(rt[0].model_name == "DNN_8w");
    CHECK(rt[0].n_valid == 1000);

    const TableExport single = export_table({b});
    CHECK(reports_from_json(single.json).size() == 1);
}

TEST_CASE("scatter: diagonal concentration and count conservation") {
    std::vector<double> p, o;
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        const double v = rng.uniform(0.0, 1.5);
        p.push_back(v);
        o.push_back(v);
    }
    p.push_back(99.0);  // out of range, excluded
    o.push_back(99.0);
    const ScatterData s = scatter_bin(p, o, 100, 0.0, 1.5);
    CHECK(s.n_in_range == 500);
    std::size_t total = 0, diag = 0;
    for (std::size_t i = 0; i < s.bins; ++i)
        for (std::size_t j = 0; j < s.bins; ++j) {
            total += s.counts.at(i, j);
            if (i == j) diag += s.counts.at(i, j);
        }
    CHECK(total == 500);
    CHECK(diag == 500);  // identical pairs land on the diagonal

    CHECK_THROWS_AS(scatter_bin({}, {}, 100, 0.0, 1.5), DataError);
    const std::string csv = scatter_csv(s);
    CHECK(csv.find("obs_bin_center") == 0);
}

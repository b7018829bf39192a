"""Quick check that the extension loads and produces sane numbers."""

import math

import gridrel_py as gr


def main():
    assert abs(gr.caidi(9.9317, 5.4205) - 1.8322) < 5e-4
    assert gr.caidi(1.0, 0.0) is None

    feeder = gr.Network.builtin("feeder6")
    print(feeder)
    exact = feeder.analytical()
    assert abs(exact["saifi"] - 10.5) < 1e-9
    assert abs(exact["ens_mwh"] - 42.5) < 1e-9

    sim = feeder.simulate(iterations=2000, seed=1, workers=4)
    for key in ("saifi", "saidi", "ens_mwh"):
        rel = abs(sim[key] - exact[key]) / exact[key]
        print(f"feeder6 {key}: simulated {sim[key]:.4f}, closed form {exact[key]:.4f}")
        assert rel < 0.05, (key, rel)
    assert len(sim["per_iteration"]) == 2000

    again = feeder.simulate(iterations=2000, seed=1, workers=1)
    assert again["per_iteration"] == sim["per_iteration"]

    case1 = gr.Network.builtin("ieee33", scenario="case1").simulate(iterations=50, seed=3, workers=4)
    case4 = gr.Network.builtin("ieee33", scenario="case4").simulate(iterations=50, seed=3, workers=4)
    print(f"ieee33 ENS case1 {case1['ens_mwh']:.3f}, case4 {case4['ens_mwh']:.3f}")
    assert case4["ens_mwh"] < case1["ens_mwh"]
    assert math.isfinite(case4["spread"]["saidi"]["p95"])

    text = feeder.to_text()
    assert gr.Network.parse(text).bus_ids == feeder.bus_ids

    try:
        gr.Network.builtin("ieee33").analytical()
    except ValueError as e:
        print("active network rejected:", e)
    else:
        raise AssertionError("closed form accepted an active network")

    print("smoke test passed")


if __name__ == "__main__":
    main()

"""End-to-end run on the noiseless preset: tune, train, forecast, score."""
import argparse
import time

from heatload import datagen
from heatload.cli import align
from heatload.pipeline import TuneConfig, forecast_window, make_windows, tune_and_train
from heatload.pso import PsoConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    gen = datagen.generate(datagen.preset("noiseless", rng_seed=args.seed))
    cons, temp = align(gen.raw_consumption, gen.raw_temperature)
    (w,) = make_windows(cons, temp)
    t0 = time.perf_counter()
    model, result = tune_and_train(w.train, w.val, TuneConfig(pso=PsoConfig(rng_seed=args.seed)))
    print(f"tuned in {time.perf_counter() - t0:.1f} s, best validation MSE {result.best_fitness:.3e} kWh^2")
    print("hyperparameters", model.hyper.as_dict())
    for mode in ("recursive", "open_loop"):
        rep = forecast_window(model, w, mode)
        print(f"{mode:9s} tau={rep.tau}  MAPE {rep.mape_percent:.3f} %  RMSE {rep.rmse:.4f} kWh")
    print(forecast_window(model, w).plot_data(), end="")


if __name__ == "__main__":
    main()

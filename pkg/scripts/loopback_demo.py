#!/usr/bin/env python3
"""Two-process split inference on the loopback interface, end to end.

Starts a receiver thread, pushes seeded random inputs through the encoder
and across the socket at several SNRs, and prints labels with measured vs
predicted timing.
"""

import argparse

import splitwire as sw
from splitwire.pipeline import random_input
from splitwire.wire import FeatureServer, SessionConfig, send


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--split", default="SP-2")
    parser.add_argument("--n-c", type=int, default=256)
    parser.add_argument("--inputs", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    graph = sw.build_resnet(18, "cifar", 10)
    model = sw.apply_split(graph, args.split, args.n_c, 2)
    weights = sw.random_weights(model, seed=args.seed)
    print(f"model {model.name}, weights fingerprint {weights.fingerprint.hex()}")

    for snr_db in (float("inf"), 10.0, 0.0):
        config = SessionConfig(port=0, snr_db=snr_db, dtype="f32", timeout=10.0)
        with FeatureServer(model, weights, config) as server:
            host, port = server.address[:2]
            client = SessionConfig(
                host=host, port=port, snr_db=snr_db, dtype="f32", timeout=10.0,
                alpha_t=1e-9, alpha_r=1e-12, rate=1e6,
            )
            print(f"\nSNR {snr_db:g} dB (receiver on {host}:{port})")
            for i in range(args.inputs):
                x = random_input(graph.input_shape, seed=args.seed + i)
                label, timing = send(model, weights, x, client, seed=args.seed + 1000 + i)
                print(
                    f"  input {i}: label {label:3d}  encoder {timing.encode_s * 1e3:6.1f} ms  "
                    f"transfer {timing.transfer_s * 1e3:6.2f} ms  server {timing.server_s * 1e3:6.1f} ms  "
                    f"predicted t_task {timing.predicted.t_task * 1e3:6.2f} ms"
                )


if __name__ == "__main__":
    main()

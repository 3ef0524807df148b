"""Regenerates the network golden fixtures with PyTorch.

Writes a small random network (DRCW), a two-example DRCD file with random
inputs, and the float64 network output for each example as little-endian
f32, into crates/core/tests/fixtures/.
"""

import argparse
import pathlib
import struct

import numpy as np
import torch
from torch import nn

SLOPE = 0.01
EPS = 1e-5


def conv_bn(prefix, idx, c_in, c_out, deconv):
    name = f"deconv{idx}" if deconv else f"conv{idx}"
    layer = (nn.ConvTranspose2d if deconv else nn.Conv2d)(c_in, c_out, 3, padding=1)
    bn = nn.BatchNorm2d(c_out, eps=EPS)
    return [(f"{prefix}.{name}", layer), (f"{prefix}.bn{idx}", bn), (None, nn.LeakyReLU(SLOPE))]


class UNet(nn.Module):
    def __init__(self, k):
        super().__init__()
        self.stages = {}
        blocks = []
        for i, name in enumerate(["enc1", "enc2", "enc3", "bottleneck"]):
            c_in = 7 if i == 0 else k << (i - 1)
            w = k << i
            blocks.append((name, conv_bn(name, 1, c_in, w, False) + conv_bn(name, 2, w, w, False)))
        for i, name in enumerate(["dec3", "dec2", "dec1"]):
            w = k << (2 - i)
            c_in = 2 * w + w
            blocks.append((name, conv_bn(name, 1, c_in, w, True) + conv_bn(name, 2, w, w, True)))
        head = conv_bn("head", 1, k, k // 2, True) + conv_bn("head", 2, k // 2, k // 4, True)
        head.append(("head.conv", nn.Conv2d(k // 4, 3, 1)))
        blocks.append(("head", head))
        self.blocks = blocks
        self.named = nn.ModuleDict()
        for _, layers in blocks:
            for n, m in layers:
                if n is not None:
                    self.named[n.replace(".", "_")] = m

    def run(self, name, x):
        for _, m in dict(self.blocks)[name]:
            x = m(x)
        return x

    def forward(self, x):
        pool = nn.MaxPool2d(2)
        up = nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False)
        e1 = self.run("enc1", x)
        e2 = self.run("enc2", pool(e1))
        e3 = self.run("enc3", pool(e2))
        b = self.run("bottleneck", pool(e3))
        d3 = self.run("dec3", torch.cat([up(b), e3], 1))
        d2 = self.run("dec2", torch.cat([up(d3), e2], 1))
        d1 = self.run("dec1", torch.cat([up(d2), e1], 1))
        return torch.relu(self.run("head", d1))

    def tensors(self):
        out = []
        for _, layers in self.blocks:
            for n, m in layers:
                if n is None:
                    continue
                if isinstance(m, nn.BatchNorm2d):
                    params = [("weight", m.weight), ("bias", m.bias),
                              ("running_mean", m.running_mean), ("running_var", m.running_var)]
                else:
                    params = [("weight", m.weight), ("bias", m.bias)]
                out += [(f"{n}.{p}", t.detach()) for p, t in params]
        return out


def randomize(net, gen):
    with torch.no_grad():
        for _, layers in net.blocks:
            for _, m in layers:
                if isinstance(m, nn.BatchNorm2d):
                    m.weight.uniform_(0.8, 1.2, generator=gen)
                    m.bias.uniform_(-0.1, 0.1, generator=gen)
                    m.running_mean.uniform_(-0.1, 0.1, generator=gen)
                    m.running_var.uniform_(0.5, 1.5, generator=gen)
                elif isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
                    fan_in = m.weight[0].numel()
                    a = (3.0 / fan_in) ** 0.5
                    m.weight.uniform_(-a, a, generator=gen)
                    m.bias.uniform_(-0.1, 0.1, generator=gen)


def write_drcw(path, tensors):
    buf = bytearray(b"DRCW")
    buf += struct.pack("<IfI", 1, SLOPE, len(tensors))
    for name, t in tensors:
        a = t.to(torch.float32).numpy()
        buf += struct.pack("<H", len(name)) + name.encode()
        buf += struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
        buf += a.astype("<f4").tobytes()
    path.write_bytes(bytes(buf))


def write_drcd(path, inputs):
    buf = bytearray(b"DRCD")
    buf += struct.pack("<IIH", 1, len(inputs), 32)
    for i, x in enumerate(inputs):
        sid = f"golden{i}".encode()
        buf += struct.pack("<I", len(sid)) + sid + struct.pack("<IIff", i, 2 * i, 1.5, 4.0)
        buf += x.astype("<f4").tobytes() + np.zeros(3 * 1024, "<f4").tobytes()
    path.write_bytes(bytes(buf))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=pathlib.Path(__file__).resolve().parent.parent
                    / "crates/core/tests/fixtures", type=pathlib.Path)
    ap.add_argument("--k", type=int, default=8)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    gen = torch.Generator().manual_seed(args.seed)
    net = UNet(args.k)
    randomize(net, gen)
    net.eval()
    tensors = net.tensors()
    write_drcw(args.out / "golden_k8.drcw", tensors)

    inputs = []
    for _ in range(2):
        x = torch.rand(7, 32, 32, generator=gen, dtype=torch.float64)
        x[3:6] = 2 * x[3:6] - 1
        inputs.append(x.to(torch.float32).numpy())
    write_drcd(args.out / "golden_inputs.drcd", inputs)

    # Reference in float64 from the float32-rounded weights and inputs.
    net = net.double()
    with torch.no_grad():
        for (_, t32), (_, t64) in zip(tensors, net.tensors()):
            t64.copy_(t32.to(torch.float32).double())
        outs = [net(torch.from_numpy(x).double()[None])[0].numpy() for x in inputs]
    (args.out / "golden_outputs.f32").write_bytes(
        b"".join(o.astype("<f4").tobytes() for o in outs))
    print("max output", max(float(o.max()) for o in outs))


if __name__ == "__main__":
    main()

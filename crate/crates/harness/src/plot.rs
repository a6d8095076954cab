//! Ready-to-run matplotlib scripts written next to each CSV.

pub fn snr_script(csv: &str) -> String {
    format!(
        r#"import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("{csv}")
fig, axes = plt.subplots(1, 2, figsize=(10, 4))
for method, g in df.groupby("method"):
    m = g.groupby("snr_db").mean(numeric_only=True)
    axes[0].plot(m.index, m["task_score"], marker="o", label=method)
    axes[1].plot(m.index, m["action_mse"], marker="o", label=method)
axes[0].set_ylabel("task score")
axes[1].set_ylabel("action MSE")
for ax in axes:
    ax.set_xlabel("SNR (dB)")
    ax.grid(True)
    ax.legend()
fig.tight_layout()
fig.savefig("sweep_snr.png", dpi=150)
"#
    )
}

pub fn ratio_script(csv: &str) -> String {
    format!(
        r#"import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("{csv}")
fig, ax = plt.subplots(figsize=(5, 4))
for method, g in df.groupby("method"):
    m = g.groupby("compression_ratio").mean(numeric_only=True)
    ax.plot(m.index, m["task_score"], marker="o", label=method)
ax.set_xscale("log")
ax.set_xlabel("compression ratio")
ax.set_ylabel("task score")
ax.grid(True)
ax.legend()
fig.tight_layout()
fig.savefig("sweep_ratio.png", dpi=150)
"#
    )
}

pub fn ber_script(csv: &str) -> String {
    format!(
        r#"import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("{csv}")
fig, ax = plt.subplots(figsize=(5, 4))
for mod, g in df.groupby("modulation"):
    ax.semilogy(g["x_db"], g["ber"].clip(lower=1e-7), marker="o", label=mod)
ax.axhline(1e-4, color="gray", linestyle="--")
ax.set_xlabel("Eb/N0 (bpsk) or SNR (qam), dB")
ax.set_ylabel("coded BER")
ax.grid(True, which="both")
ax.legend()
fig.tight_layout()
fig.savefig("ber.png", dpi=150)
"#
    )
}

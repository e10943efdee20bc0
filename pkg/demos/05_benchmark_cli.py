# %% [markdown]
# # Running experiments from the command line
#
# Every experiment is also a `circsense` subcommand that writes a CSV. The
# first line is a comment with the tool version and the full
# configuration. Runs are keyed by seed, so the same command gives the
# same bytes whatever the number of worker threads.

# %%
import io

from circsense.cli import main

buf = io.StringIO()
main(["sweep", "--n", "64", "--m", "8,16,24,32", "--s", "2,4", "--trials", "20", "--algorithm", "htp"], stdout=buf)
print(buf.getvalue())

# %% [markdown]
# The same sweep with four workers is identical.

# %%
again = io.StringIO()
main(["sweep", "--n", "64", "--m", "8,16,24,32", "--s", "2,4", "--trials", "20", "--algorithm", "htp",
      "--workers", "4"], stdout=again)
print(again.getvalue() == buf.getvalue())

# %% [markdown]
# `lemma-check` exits with status 1 if any Fourier projector property
# fails, so it can guard a build.

# %%
print("exit status", main(["lemma-check", "--n", "32", "--draws", "20"]))

"""Generate the bundled rate-1/2 (3,6)-regular LDPC code asset."""
import sys, time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
import numpy as np
from unfoldrx import ldpc

t0 = time.time()
rng = np.random.default_rng(20260801)
code = ldpc.peg_construct(2400, 1200, 3, rng)
print(f"construct: {time.time()-t0:.1f}s  k={code.k} rank ok")
assert all(len(a) == 3 for a in code.vn_adj)
assert all(len(a) == 6 for a in code.cn_adj)
out = Path(__file__).resolve().parents[1] / "src/unfoldrx/assets/ldpc_n2400_r12.alist"
out.write_text(ldpc.dump_alist(code))
# verify round trip + encoder
code2 = ldpc.parse_alist(out.read_text())
d = np.random.default_rng(1).integers(0, 2, (4, 1200)).astype(np.uint8)
cw = code2.encode(d)
assert (code2.syndrome(cw) == 0).all()
print("asset written:", out)

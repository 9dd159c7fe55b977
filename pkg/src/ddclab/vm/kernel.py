"""Interpreter loop for MiniLang bytecode.

The loop is written in the numba-compatible subset of Python and operates on
flat numpy arrays only.  ``DDCLAB_JIT=0`` in the environment selects the plain
Python path (same function, uncompiled); any other value, or unset, compiles it
with ``numba.njit`` when numba is importable.

Value model: every stack slot, array cell and global is a (tag, payload) pair.
Tags are INT, STR and ARR; STR/ARR payloads are handles into the string and
array tables.  Handles are never convertible to integers, so programs cannot
observe allocation order or addresses.
"""

import os

import numpy as np

JIT_ENABLED = os.environ.get("DDCLAB_JIT", "1") != "0"

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    JIT_ENABLED = False


def njit(*args, **kwargs):
    if JIT_ENABLED:
        return numba.njit(*args, **kwargs)
    return lambda func: func


T_INT = 0
T_STR = 1
T_ARR = 2

# trap codes, see TRAP_KINDS in machine.py
TR_NONE = 0
TR_INVALID_OPCODE = 1
TR_STACK_UNDERFLOW = 2
TR_STACK_OVERFLOW = 3
TR_DIV_ZERO = 4
TR_INDEX_RANGE = 5
TR_TYPE_ERROR = 6
TR_UNDECLARED_PATH = 7
TR_BAD_CALL = 8
TR_BAD_JUMP = 9
TR_STEP_LIMIT = 10
TR_MEMORY_LIMIT = 11
TR_OUTPUT_LIMIT = 12
TR_BAD_CONSTANT = 13
TR_BAD_ARGUMENT = 14
TR_BAD_LOCAL = 15
TR_NO_ENTRY = 16

STACK_SLOTS = 1 << 20
MAX_FRAMES = 1 << 16
GLOBALS_PER_MODULE = 1 << 16


@njit(cache=True)
def _grow_u8(a, need):
    if need <= a.shape[0]:
        return a
    n = a.shape[0] * 2
    if n < need:
        n = need
    b = np.zeros(n, np.uint8)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def _grow_i64(a, need):
    if need <= a.shape[0]:
        return a
    n = a.shape[0] * 2
    if n < need:
        n = need
    b = np.zeros(n, np.int64)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def _grow_i8(a, need):
    if need <= a.shape[0]:
        return a
    n = a.shape[0] * 2
    if n < need:
        n = need
    b = np.zeros(n, np.int8)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def _bytes_eq(sb, o1, n1, o2, n2):
    if n1 != n2:
        return False
    for k in range(n1):
        if sb[o1 + k] != sb[o2 + k]:
            return False
    return True


@njit(cache=True)
def _trunc_div(a, b):
    # b != 0; b == -1 handled by caller so the quotient cannot overflow
    q = a // b
    if q < 0 and q * b != a:
        q += 1
    return q


@njit(cache=True)
def run_kernel(
    code,
    mod_code_base,
    mod_code_len,
    mod_fn_base,
    mod_fn_count,
    mod_const_base,
    mod_const_count,
    fn_off,
    fn_arity,
    entry_fn,
    s_off,
    s_len,
    sb,
    n_str,
    sb_used,
    argv,
    f_path,
    f_data,
    f_written,
    n_files,
    residue,
    max_steps,
    max_mem,
    max_out,
):
    stag = np.zeros(STACK_SLOTS, np.int8)
    sval = np.zeros(STACK_SLOTS, np.int64)
    fr_pc = np.zeros(MAX_FRAMES, np.int64)
    fr_mod = np.zeros(MAX_FRAMES, np.int64)
    fr_bp = np.zeros(MAX_FRAMES, np.int64)
    fr_lim = np.zeros(MAX_FRAMES, np.int64)
    gtag = np.zeros(2 * GLOBALS_PER_MODULE, np.int8)
    gval = np.zeros(2 * GLOBALS_PER_MODULE, np.int64)

    a_off = np.zeros(64, np.int64)
    a_len = np.zeros(64, np.int64)
    a_cap = np.zeros(64, np.int64)
    n_arr = 0
    ctag = np.zeros(1024, np.int8)
    cval = np.zeros(1024, np.int64)
    c_used = 0

    out = np.zeros(256, np.uint8)
    out_len = 0

    mem = 0
    steps = 0
    res_pos = 0
    n_res = residue.shape[0]

    status = 0
    exit_code = 0
    trap = TR_NONE
    trap_mod = 0
    trap_pc = 0

    sp = 0
    depth = 0
    bp = 0
    lim = 0
    mod = 0
    pc = 0

    if entry_fn < 0 or entry_fn >= mod_fn_count[0] or fn_arity[entry_fn] != 0:
        trap = TR_NO_ENTRY
    else:
        pc = fn_off[entry_fn]
        fr_pc[0] = -1
        depth = 1

    while trap == TR_NONE:
        base = mod_code_base[mod]
        end = base + mod_code_len[mod]
        if pc < base or pc >= end:
            trap = TR_BAD_JUMP
            break
        if steps >= max_steps:
            trap = TR_STEP_LIMIT
            break
        steps += 1
        op = np.int64(code[pc])

        # -- constants and stack ------------------------------------------------
        if op == 0x01:  # PUSH_I8
            if pc + 2 > end:
                trap = TR_INVALID_OPCODE
                break
            v = np.int64(code[pc + 1])
            if v >= 128:
                v -= 256
            if sp >= STACK_SLOTS:
                trap = TR_STACK_OVERFLOW
                break
            stag[sp] = T_INT
            sval[sp] = v
            sp += 1
            pc += 2
        elif op == 0x02:  # PUSH_I64
            if pc + 9 > end:
                trap = TR_INVALID_OPCODE
                break
            lo = 0
            for k in range(7):
                lo |= np.int64(code[pc + 1 + k]) << (8 * k)
            hi = np.int64(code[pc + 8])
            if hi >= 128:
                hi -= 256
            if sp >= STACK_SLOTS:
                trap = TR_STACK_OVERFLOW
                break
            stag[sp] = T_INT
            sval[sp] = lo + hi * 72057594037927936
            sp += 1
            pc += 9
        elif op == 0x03:  # PUSH_CONST
            if pc + 5 > end:
                trap = TR_INVALID_OPCODE
                break
            idx = np.int64(code[pc + 1]) | (np.int64(code[pc + 2]) << 8) | (np.int64(code[pc + 3]) << 16) | (np.int64(code[pc + 4]) << 24)
            if idx >= mod_const_count[mod]:
                trap = TR_BAD_CONSTANT
                break
            if sp >= STACK_SLOTS:
                trap = TR_STACK_OVERFLOW
                break
            stag[sp] = T_STR
            sval[sp] = mod_const_base[mod] + idx
            sp += 1
            pc += 5
        elif op == 0x04:  # POP
            if sp <= lim:
                trap = TR_STACK_UNDERFLOW
                break
            sp -= 1
            pc += 1
        elif op == 0x05:  # DUP
            if sp <= lim:
                trap = TR_STACK_UNDERFLOW
                break
            if sp >= STACK_SLOTS:
                trap = TR_STACK_OVERFLOW
                break
            stag[sp] = stag[sp - 1]
            sval[sp] = sval[sp - 1]
            sp += 1
            pc += 1
        elif op == 0x06 or op == 0x07 or op == 0x08 or op == 0x09:  # LOAD STORE GLOAD GSTORE
            if pc + 3 > end:
                trap = TR_INVALID_OPCODE
                break
            idx = np.int64(code[pc + 1]) | (np.int64(code[pc + 2]) << 8)
            if op == 0x06:
                if idx >= lim - bp:
                    trap = TR_BAD_LOCAL
                    break
                if sp >= STACK_SLOTS:
                    trap = TR_STACK_OVERFLOW
                    break
                stag[sp] = stag[bp + idx]
                sval[sp] = sval[bp + idx]
                sp += 1
            elif op == 0x07:
                if idx >= lim - bp:
                    trap = TR_BAD_LOCAL
                    break
                if sp <= lim:
                    trap = TR_STACK_UNDERFLOW
                    break
                sp -= 1
                stag[bp + idx] = stag[sp]
                sval[bp + idx] = sval[sp]
            elif op == 0x08:
                g = mod * GLOBALS_PER_MODULE + idx
                if sp >= STACK_SLOTS:
                    trap = TR_STACK_OVERFLOW
                    break
                stag[sp] = gtag[g]
                sval[sp] = gval[g]
                sp += 1
            else:
                g = mod * GLOBALS_PER_MODULE + idx
                if sp <= lim:
                    trap = TR_STACK_UNDERFLOW
                    break
                sp -= 1
                gtag[g] = stag[sp]
                gval[g] = sval[sp]
            pc += 3

        # -- integer arithmetic ---------------------------------------------------
        elif (op >= 0x10 and op <= 0x1A and op != 0x15) or (op >= 0x22 and op <= 0x25):
            if sp - 2 < lim:
                trap = TR_STACK_UNDERFLOW
                break
            if stag[sp - 1] != T_INT or stag[sp - 2] != T_INT:
                trap = TR_TYPE_ERROR
                break
            a = sval[sp - 2]
            b = sval[sp - 1]
            r = a
            if op == 0x10:
                r = a + b
            elif op == 0x11:
                r = a - b
            elif op == 0x12:
                r = a * b
            elif op == 0x13 or op == 0x14:
                if b == 0:
                    trap = TR_DIV_ZERO
                    break
                if b == -1:
                    q = 0 - a
                else:
                    q = _trunc_div(a, b)
                if op == 0x13:
                    r = q
                else:
                    r = a - q * b
            elif op == 0x16:
                r = a & b
            elif op == 0x17:
                r = a | b
            elif op == 0x18:
                r = a ^ b
            elif op == 0x19:
                r = a << (b & 63)
            elif op == 0x1A:
                r = a >> (b & 63)
            elif op == 0x22:
                r = 1 if a < b else 0
            elif op == 0x23:
                r = 1 if a <= b else 0
            elif op == 0x24:
                r = 1 if a > b else 0
            else:
                r = 1 if a >= b else 0
            sp -= 1
            sval[sp - 1] = r
            pc += 1
        elif op == 0x1B:  # NOT
            if sp <= lim:
                trap = TR_STACK_UNDERFLOW
                break
            if stag[sp - 1] != T_INT:
                trap = TR_TYPE_ERROR
                break
            sval[sp - 1] = 1 if sval[sp - 1] == 0 else 0
            pc += 1
        elif op == 0x20 or op == 0x21:  # EQ NE
            if sp - 2 < lim:
                trap = TR_STACK_UNDERFLOW
                break
            ta = stag[sp - 2]
            tb = stag[sp - 1]
            same = False
            if ta == T_INT and tb == T_INT:
                same = sval[sp - 2] == sval[sp - 1]
            elif ta == T_STR and tb == T_STR:
                h1 = sval[sp - 2]
                h2 = sval[sp - 1]
                same = _bytes_eq(sb, s_off[h1], s_len[h1], s_off[h2], s_len[h2])
            else:
                trap = TR_TYPE_ERROR
                break
            sp -= 1
            stag[sp - 1] = T_INT
            if op == 0x20:
                sval[sp - 1] = 1 if same else 0
            else:
                sval[sp - 1] = 0 if same else 1
            pc += 1

        # -- control flow -----------------------------------------------------------
        elif op == 0x30 or op == 0x31 or op == 0x32:  # JMP JZ JNZ
            if pc + 5 > end:
                trap = TR_INVALID_OPCODE
                break
            tgt = np.int64(code[pc + 1]) | (np.int64(code[pc + 2]) << 8) | (np.int64(code[pc + 3]) << 16) | (np.int64(code[pc + 4]) << 24)
            if tgt >= mod_code_len[mod]:
                trap = TR_BAD_JUMP
                break
            if op == 0x30:
                pc = base + tgt
            else:
                if sp <= lim:
                    trap = TR_STACK_UNDERFLOW
                    break
                if stag[sp - 1] != T_INT:
                    trap = TR_TYPE_ERROR
                    break
                sp -= 1
                z = sval[sp] == 0
                if (op == 0x31) == z:
                    pc = base + tgt
                else:
                    pc += 5
        elif op == 0x38 or op == 0x39:  # CALL CALLR
            if pc + 5 > end:
                trap = TR_INVALID_OPCODE
                break
            raw = np.int64(code[pc + 1]) | (np.int64(code[pc + 2]) << 8) | (np.int64(code[pc + 3]) << 16) | (np.int64(code[pc + 4]) << 24)
            tmod = mod
            if raw >= 2147483648:
                tmod = 1
                raw -= 2147483648
            if raw >= mod_fn_count[tmod]:
                trap = TR_BAD_CALL
                break
            g = mod_fn_base[tmod] + raw
            n = fn_arity[g]
            if sp - n < lim:
                trap = TR_STACK_UNDERFLOW
                break
            if depth >= MAX_FRAMES:
                trap = TR_STACK_OVERFLOW
                break
            if op == 0x39:
                i = sp - n
                j = sp - 1
                while i < j:
                    t8 = stag[i]
                    stag[i] = stag[j]
                    stag[j] = t8
                    t64 = sval[i]
                    sval[i] = sval[j]
                    sval[j] = t64
                    i += 1
                    j -= 1
            fr_pc[depth] = pc + 5
            fr_mod[depth] = mod
            fr_bp[depth] = bp
            fr_lim[depth] = lim
            depth += 1
            bp = sp - n
            lim = sp
            mod = tmod
            pc = fn_off[g]
        elif op == 0x3A:  # RET
            if sp <= lim:
                trap = TR_STACK_UNDERFLOW
                break
            rt = stag[sp - 1]
            rv = sval[sp - 1]
            depth -= 1
            if depth == 0:
                exit_code = rv if rt == T_INT else 0
                status = 0
                break
            sp = bp
            pc = fr_pc[depth]
            mod = fr_mod[depth]
            bp = fr_bp[depth]
            lim = fr_lim[depth]
            stag[sp] = rt
            sval[sp] = rv
            sp += 1
        elif op == 0x3B:  # LOCALS
            if pc + 3 > end:
                trap = TR_INVALID_OPCODE
                break
            n = np.int64(code[pc + 1]) | (np.int64(code[pc + 2]) << 8)
            have = lim - bp
            if n < have or sp != lim:
                trap = TR_BAD_LOCAL
                break
            if bp + n > STACK_SLOTS:
                trap = TR_STACK_OVERFLOW
                break
            for k in range(have, n):
                stag[bp + k] = T_INT
                sval[bp + k] = 0
            sp = bp + n
            lim = sp
            pc += 3

        # -- indexing -----------------------------------------------------------------
        elif op == 0x40:  # INDEX
            if sp - 2 < lim:
                trap = TR_STACK_UNDERFLOW
                break
            if stag[sp - 1] != T_INT:
                trap = TR_TYPE_ERROR
                break
            i = sval[sp - 1]
            h = sval[sp - 2]
            if stag[sp - 2] == T_ARR:
                if i < 0 or i >= a_len[h]:
                    trap = TR_INDEX_RANGE
                    break
                sp -= 1
                stag[sp - 1] = ctag[a_off[h] + i]
                sval[sp - 1] = cval[a_off[h] + i]
            elif stag[sp - 2] == T_STR:
                if i < 0 or i >= s_len[h]:
                    trap = TR_INDEX_RANGE
                    break
                sp -= 1
                stag[sp - 1] = T_INT
                sval[sp - 1] = np.int64(sb[s_off[h] + i])
            else:
                trap = TR_TYPE_ERROR
                break
            pc += 1
        elif op == 0x41:  # SETINDEX
            if sp - 3 < lim:
                trap = TR_STACK_UNDERFLOW
                break
            if stag[sp - 3] != T_ARR or stag[sp - 2] != T_INT:
                trap = TR_TYPE_ERROR
                break
            h = sval[sp - 3]
            i = sval[sp - 2]
            if i < 0 or i >= a_len[h]:
                trap = TR_INDEX_RANGE
                break
            ctag[a_off[h] + i] = stag[sp - 1]
            cval[a_off[h] + i] = sval[sp - 1]
            sp -= 3
            pc += 1

        # -- builtins -------------------------------------------------------------------
        elif op == 0x42:  # BUILTIN
            if pc + 2 > end:
                trap = TR_INVALID_OPCODE
                break
            bid = np.int64(code[pc + 1])
            nargs = -1
            if bid == 1 or bid == 12:
                nargs = 0
            elif bid == 0 or bid == 2 or bid == 3 or bid == 5 or bid == 9 or bid == 10 or bid == 11 or bid == 14 or bid == 15 or bid == 17 or bid == 18:
                nargs = 1
            elif bid == 4 or bid == 6 or bid == 8 or bid == 13 or bid == 16:
                nargs = 2
            elif bid == 7:
                nargs = 3
            if nargs < 0:
                trap = TR_INVALID_OPCODE
                break
            if sp - nargs < lim:
                trap = TR_STACK_UNDERFLOW
                break
            if sp + 1 > STACK_SLOTS:
                trap = TR_STACK_OVERFLOW
                break
            a0 = sp - nargs
            rtag = T_INT
            rval = 0
            if bid == 0:  # print(s)
                if stag[a0] != T_STR:
                    trap = TR_TYPE_ERROR
                    break
                h = sval[a0]
                n = s_len[h]
                if out_len + n > max_out:
                    trap = TR_OUTPUT_LIMIT
                    break
                out = _grow_u8(out, out_len + n)
                o = s_off[h]
                for k in range(n):
                    out[out_len + k] = sb[o + k]
                out_len += n
            elif bid == 1 or bid == 12 or bid == 16 or bid == 17:  # args array make alloc
                n = 0
                fillt = T_INT
                fillv = 0
                if bid == 1:
                    n = argv.shape[0]
                elif bid == 16 or bid == 17:
                    if stag[a0] != T_INT:
                        trap = TR_TYPE_ERROR
                        break
                    n = sval[a0]
                    if n < 0:
                        trap = TR_BAD_ARGUMENT
                        break
                    if bid == 16:
                        fillt = stag[a0 + 1]
                        fillv = sval[a0 + 1]
                cap = n if n > 4 else 4
                mem += cap + 1
                if mem > max_mem:
                    trap = TR_MEMORY_LIMIT
                    break
                if n_arr >= a_off.shape[0]:
                    a_off = _grow_i64(a_off, n_arr + 1)
                    a_len = _grow_i64(a_len, n_arr + 1)
                    a_cap = _grow_i64(a_cap, n_arr + 1)
                ctag = _grow_i8(ctag, c_used + cap)
                cval = _grow_i64(cval, c_used + cap)
                a_off[n_arr] = c_used
                a_len[n_arr] = n
                a_cap[n_arr] = cap
                for k in range(n):
                    if bid == 1:
                        ctag[c_used + k] = T_STR
                        cval[c_used + k] = argv[k]
                    elif bid == 17:
                        ctag[c_used + k] = T_INT
                        if n_res > 0:
                            cval[c_used + k] = np.int64(residue[res_pos % n_res])
                            res_pos += 1
                        else:
                            cval[c_used + k] = 0
                    else:
                        ctag[c_used + k] = fillt
                        cval[c_used + k] = fillv
                c_used += cap
                rtag = T_ARR
                rval = n_arr
                n_arr += 1
            elif bid == 2:  # exit(n)
                if stag[a0] != T_INT:
                    trap = TR_TYPE_ERROR
                    break
                exit_code = sval[a0]
                status = 0
                break
            elif bid == 3 or bid == 18:  # read_file(p) exists(p)
                if stag[a0] != T_STR:
                    trap = TR_TYPE_ERROR
                    break
                h = sval[a0]
                found = -1
                for k in range(n_files):
                    ph = f_path[k]
                    if _bytes_eq(sb, s_off[h], s_len[h], s_off[ph], s_len[ph]):
                        found = k
                        break
                if bid == 18:
                    rval = 1 if found >= 0 else 0
                else:
                    if found < 0:
                        trap = TR_UNDECLARED_PATH
                        break
                    rtag = T_STR
                    rval = f_data[found]
            elif bid == 4:  # write_file(p, s)
                if stag[a0] != T_STR or stag[a0 + 1] != T_STR:
                    trap = TR_TYPE_ERROR
                    break
                h = sval[a0]
                found = -1
                for k in range(n_files):
                    ph = f_path[k]
                    if _bytes_eq(sb, s_off[h], s_len[h], s_off[ph], s_len[ph]):
                        found = k
                        break
                if found < 0:
                    if n_files >= f_path.shape[0]:
                        f_path = _grow_i64(f_path, n_files + 1)
                        f_data = _grow_i64(f_data, n_files + 1)
                        f_written = _grow_i64(f_written, n_files + 1)
                    found = n_files
                    f_path[found] = h
                    n_files += 1
                f_data[found] = sval[a0 + 1]
                f_written[found] = 1
            elif bid == 5:  # len(x)
                if stag[a0] == T_STR:
                    rval = s_len[sval[a0]]
                elif stag[a0] == T_ARR:
                    rval = a_len[sval[a0]]
                else:
                    trap = TR_TYPE_ERROR
                    break
            elif bid == 6:  # byte_at(s, i)
                if stag[a0] != T_STR or stag[a0 + 1] != T_INT:
                    trap = TR_TYPE_ERROR
                    break
                h = sval[a0]
                i = sval[a0 + 1]
                if i < 0 or i >= s_len[h]:
                    trap = TR_INDEX_RANGE
                    break
                rval = np.int64(sb[s_off[h] + i])
            elif bid == 7 or bid == 8 or bid == 9 or bid == 10 or bid == 15:
                # string constructors: substr cat chr itos bytes
                new_off = 0
                new_len = 0
                if bid == 7:
                    if stag[a0] != T_STR or stag[a0 + 1] != T_INT or stag[a0 + 2] != T_INT:
                        trap = TR_TYPE_ERROR
                        break
                    h = sval[a0]
                    st = sval[a0 + 1]
                    n = sval[a0 + 2]
                    if st < 0 or n < 0 or st + n > s_len[h]:
                        trap = TR_INDEX_RANGE
                        break
                    # substrings share the parent's bytes
                    new_off = s_off[h] + st
                    new_len = n
                    mem += 1
                elif bid == 8:
                    if stag[a0] != T_STR or stag[a0 + 1] != T_STR:
                        trap = TR_TYPE_ERROR
                        break
                    h1 = sval[a0]
                    h2 = sval[a0 + 1]
                    n1 = s_len[h1]
                    n2 = s_len[h2]
                    mem += n1 + n2 + 1
                    if mem > max_mem:
                        trap = TR_MEMORY_LIMIT
                        break
                    sb = _grow_u8(sb, sb_used + n1 + n2)
                    o1 = s_off[h1]
                    o2 = s_off[h2]
                    for k in range(n1):
                        sb[sb_used + k] = sb[o1 + k]
                    for k in range(n2):
                        sb[sb_used + n1 + k] = sb[o2 + k]
                    new_off = sb_used
                    new_len = n1 + n2
                    sb_used += new_len
                elif bid == 9:
                    if stag[a0] != T_INT:
                        trap = TR_TYPE_ERROR
                        break
                    v = sval[a0]
                    if v < 0 or v > 255:
                        trap = TR_BAD_ARGUMENT
                        break
                    mem += 2
                    sb = _grow_u8(sb, sb_used + 1)
                    sb[sb_used] = v
                    new_off = sb_used
                    new_len = 1
                    sb_used += 1
                elif bid == 10:
                    if stag[a0] != T_INT:
                        trap = TR_TYPE_ERROR
                        break
                    v = sval[a0]
                    digits = np.zeros(20, np.uint8)
                    nd = 0
                    neg = v < 0
                    # work with non-positive values so the minimum integer is exact
                    w = v if neg else 0 - v
                    if w == 0:
                        digits[0] = 48
                        nd = 1
                    while w != 0:
                        q = _trunc_div(w, 10)
                        digits[nd] = 48 + (q * 10 - w)
                        nd += 1
                        w = q
                    new_len = nd + (1 if neg else 0)
                    mem += new_len + 1
                    sb = _grow_u8(sb, sb_used + new_len)
                    k0 = 0
                    if neg:
                        sb[sb_used] = 45
                        k0 = 1
                    for k in range(nd):
                        sb[sb_used + k0 + k] = digits[nd - 1 - k]
                    new_off = sb_used
                    sb_used += new_len
                else:
                    if stag[a0] != T_ARR:
                        trap = TR_TYPE_ERROR
                        break
                    h = sval[a0]
                    n = a_len[h]
                    ao = a_off[h]
                    bad = False
                    for k in range(n):
                        if ctag[ao + k] != T_INT or cval[ao + k] < 0 or cval[ao + k] > 255:
                            bad = True
                            break
                    if bad:
                        trap = TR_BAD_ARGUMENT
                        break
                    mem += n + 1
                    if mem > max_mem:
                        trap = TR_MEMORY_LIMIT
                        break
                    sb = _grow_u8(sb, sb_used + n)
                    for k in range(n):
                        sb[sb_used + k] = cval[ao + k]
                    new_off = sb_used
                    new_len = n
                    sb_used += n
                if mem > max_mem:
                    trap = TR_MEMORY_LIMIT
                    break
                if n_str >= s_off.shape[0]:
                    s_off = _grow_i64(s_off, n_str + 1)
                    s_len = _grow_i64(s_len, n_str + 1)
                s_off[n_str] = new_off
                s_len[n_str] = new_len
                rtag = T_STR
                rval = n_str
                n_str += 1
            elif bid == 11:  # stoi(s)
                if stag[a0] != T_STR:
                    trap = TR_TYPE_ERROR
                    break
                h = sval[a0]
                o = s_off[h]
                n = s_len[h]
                k = 0
                neg = False
                if n > 0 and sb[o] == 45:
                    neg = True
                    k = 1
                if k >= n:
                    trap = TR_BAD_ARGUMENT
                    break
                acc = np.int64(0)
                bad = False
                while k < n:
                    c = np.int64(sb[o + k])
                    if c < 48 or c > 57:
                        bad = True
                        break
                    acc = acc * 10 + (c - 48)
                    k += 1
                if bad:
                    trap = TR_BAD_ARGUMENT
                    break
                rval = 0 - acc if neg else acc
            elif bid == 13:  # push(a, v)
                if stag[a0] != T_ARR:
                    trap = TR_TYPE_ERROR
                    break
                h = sval[a0]
                if a_len[h] >= a_cap[h]:
                    ncap = a_cap[h] * 2
                    mem += ncap
                    if mem > max_mem:
                        trap = TR_MEMORY_LIMIT
                        break
                    ctag = _grow_i8(ctag, c_used + ncap)
                    cval = _grow_i64(cval, c_used + ncap)
                    oo = a_off[h]
                    for k in range(a_len[h]):
                        ctag[c_used + k] = ctag[oo + k]
                        cval[c_used + k] = cval[oo + k]
                    a_off[h] = c_used
                    a_cap[h] = ncap
                    c_used += ncap
                ctag[a_off[h] + a_len[h]] = stag[a0 + 1]
                cval[a_off[h] + a_len[h]] = sval[a0 + 1]
                a_len[h] += 1
            elif bid == 14:  # pop(a)
                if stag[a0] != T_ARR:
                    trap = TR_TYPE_ERROR
                    break
                h = sval[a0]
                if a_len[h] == 0:
                    trap = TR_INDEX_RANGE
                    break
                a_len[h] -= 1
                rtag = ctag[a_off[h] + a_len[h]]
                rval = cval[a_off[h] + a_len[h]]
            sp = a0
            stag[sp] = rtag
            sval[sp] = rval
            sp += 1
            pc += 2
        elif op == 0x15:  # NEG
            if sp <= lim:
                trap = TR_STACK_UNDERFLOW
                break
            if stag[sp - 1] != T_INT:
                trap = TR_TYPE_ERROR
                break
            sval[sp - 1] = 0 - sval[sp - 1]
            pc += 1
        else:
            trap = TR_INVALID_OPCODE
            break

    if trap != TR_NONE:
        status = 1
        trap_mod = mod
        trap_pc = pc - mod_code_base[mod]
    return (
        status,
        exit_code,
        trap,
        trap_mod,
        trap_pc,
        steps,
        out[:out_len].copy(),
        s_off,
        s_len,
        sb,
        n_str,
        f_path,
        f_data,
        f_written,
        n_files,
    )

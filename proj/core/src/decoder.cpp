#include "mcvd/decoder.hpp"

#include <cstdio>
#include <string>

namespace mcvd {
namespace {

// ---------------------------------------------------------------------------
// Opcode attribute tables.
//
// Each entry encodes everything needed to find the end of an instruction and
// classify its control flow: ModR/M presence, immediate class, branch class.
// Attributes describe 64-bit mode only; entries that are invalid in 64-bit
// mode (or taken over by prefixes/escapes handled before table lookup) are 0.
// ---------------------------------------------------------------------------

enum Imm : std::uint16_t {
  I_NONE = 0,
  I_8,      // imm8
  I_16,     // imm16
  I_Z,      // imm16/32 by operand size (REX.W keeps 32)
  I_V,      // imm16/32/64 by operand size + REX.W (B8..BF only)
  I_MOFFS,  // absolute moffs, address-size wide
  R_8,      // rel8
  R_32,     // rel32 (operand-size prefix ignored for near branches)
};

enum Br : std::uint16_t {
  B_NONE = 0,
  B_CALL,
  B_JMP,
  B_JCC,
  B_RET,
  B_GRP5,  // FF group: /2-/5 are indirect call/jmp, rest not branches
};

constexpr std::uint16_t VALID = 0x0001;
constexpr std::uint16_t MODRM = 0x0002;
constexpr std::uint16_t RESOLVE = 0x0100;  // relative target is resolved
constexpr std::uint16_t GRP3 = 0x0200;     // F6/F7: only TEST /0 /1 carry an immediate

constexpr std::uint16_t imm_bits(Imm i) { return static_cast<std::uint16_t>(i << 2); }
constexpr std::uint16_t br_bits(Br b) { return static_cast<std::uint16_t>(b << 5); }
constexpr Imm imm_of(std::uint16_t a) { return static_cast<Imm>((a >> 2) & 7); }
constexpr Br br_of(std::uint16_t a) { return static_cast<Br>((a >> 5) & 7); }

constexpr std::uint16_t OP = VALID;
constexpr std::uint16_t OP_I8 = VALID | imm_bits(I_8);
constexpr std::uint16_t OP_IZ = VALID | imm_bits(I_Z);
constexpr std::uint16_t OP_IV = VALID | imm_bits(I_V);
constexpr std::uint16_t OP_MOFFS = VALID | imm_bits(I_MOFFS);
constexpr std::uint16_t RM = VALID | MODRM;
constexpr std::uint16_t RM_I8 = VALID | MODRM | imm_bits(I_8);
constexpr std::uint16_t RM_IZ = VALID | MODRM | imm_bits(I_Z);
constexpr std::uint16_t JCC8 = VALID | imm_bits(R_8) | br_bits(B_JCC) | RESOLVE;
constexpr std::uint16_t JCC32 = VALID | imm_bits(R_32) | br_bits(B_JCC) | RESOLVE;
constexpr std::uint16_t LOOP8 = VALID | imm_bits(R_8) | br_bits(B_JCC);  // E0-E3: target left unresolved
constexpr std::uint16_t CALL32 = VALID | imm_bits(R_32) | br_bits(B_CALL) | RESOLVE;
constexpr std::uint16_t JMP32 = VALID | imm_bits(R_32) | br_bits(B_JMP) | RESOLVE;
constexpr std::uint16_t JMP8 = VALID | imm_bits(R_8) | br_bits(B_JMP) | RESOLVE;
constexpr std::uint16_t RET_ = VALID | br_bits(B_RET);
constexpr std::uint16_t RET_IW = VALID | imm_bits(I_16) | br_bits(B_RET);
constexpr std::uint16_t GROUP3_B = RM_I8 | GRP3;
constexpr std::uint16_t GROUP3_Z = RM_IZ | GRP3;
constexpr std::uint16_t GROUP5 = RM | br_bits(B_GRP5);
constexpr std::uint16_t UNDEF = 0;

// One-byte opcode map.
constexpr std::uint16_t kMapOne[256] = {
    /*[0x00]*/ RM,        // ADD Eb,Gb
    /*[0x01]*/ RM,        // ADD Ev,Gv
    /*[0x02]*/ RM,        // ADD Gb,Eb
    /*[0x03]*/ RM,        // ADD Gv,Ev
    /*[0x04]*/ OP_I8,     // ADD AL,Ib
    /*[0x05]*/ OP_IZ,     // ADD rAX,Iz
    /*[0x06]*/ UNDEF,     // PUSH ES (invalid in 64-bit)
    /*[0x07]*/ UNDEF,     // POP ES
    /*[0x08]*/ RM,        // OR
    /*[0x09]*/ RM,
    /*[0x0A]*/ RM,
    /*[0x0B]*/ RM,
    /*[0x0C]*/ OP_I8,
    /*[0x0D]*/ OP_IZ,
    /*[0x0E]*/ UNDEF,     // PUSH CS
    /*[0x0F]*/ UNDEF,     // two-byte escape, handled before lookup
    /*[0x10]*/ RM,        // ADC
    /*[0x11]*/ RM,
    /*[0x12]*/ RM,
    /*[0x13]*/ RM,
    /*[0x14]*/ OP_I8,
    /*[0x15]*/ OP_IZ,
    /*[0x16]*/ UNDEF,     // PUSH SS
    /*[0x17]*/ UNDEF,     // POP SS
    /*[0x18]*/ RM,        // SBB
    /*[0x19]*/ RM,
    /*[0x1A]*/ RM,
    /*[0x1B]*/ RM,
    /*[0x1C]*/ OP_I8,
    /*[0x1D]*/ OP_IZ,
    /*[0x1E]*/ UNDEF,     // PUSH DS
    /*[0x1F]*/ UNDEF,     // POP DS
    /*[0x20]*/ RM,        // AND
    /*[0x21]*/ RM,
    /*[0x22]*/ RM,
    /*[0x23]*/ RM,
    /*[0x24]*/ OP_I8,
    /*[0x25]*/ OP_IZ,
    /*[0x26]*/ UNDEF,     // ES: prefix, consumed earlier
    /*[0x27]*/ UNDEF,     // DAA
    /*[0x28]*/ RM,        // SUB
    /*[0x29]*/ RM,
    /*[0x2A]*/ RM,
    /*[0x2B]*/ RM,
    /*[0x2C]*/ OP_I8,
    /*[0x2D]*/ OP_IZ,
    /*[0x2E]*/ UNDEF,     // CS: prefix
    /*[0x2F]*/ UNDEF,     // DAS
    /*[0x30]*/ RM,        // XOR
    /*[0x31]*/ RM,
    /*[0x32]*/ RM,
    /*[0x33]*/ RM,
    /*[0x34]*/ OP_I8,
    /*[0x35]*/ OP_IZ,
    /*[0x36]*/ UNDEF,     // SS: prefix
    /*[0x37]*/ UNDEF,     // AAA
    /*[0x38]*/ RM,        // CMP
    /*[0x39]*/ RM,
    /*[0x3A]*/ RM,
    /*[0x3B]*/ RM,
    /*[0x3C]*/ OP_I8,
    /*[0x3D]*/ OP_IZ,
    /*[0x3E]*/ UNDEF,     // DS: prefix
    /*[0x3F]*/ UNDEF,     // AAS
    /*[0x40]*/ UNDEF,     // REX prefixes, consumed earlier
    /*[0x41]*/ UNDEF,
    /*[0x42]*/ UNDEF,
    /*[0x43]*/ UNDEF,
    /*[0x44]*/ UNDEF,
    /*[0x45]*/ UNDEF,
    /*[0x46]*/ UNDEF,
    /*[0x47]*/ UNDEF,
    /*[0x48]*/ UNDEF,
    /*[0x49]*/ UNDEF,
    /*[0x4A]*/ UNDEF,
    /*[0x4B]*/ UNDEF,
    /*[0x4C]*/ UNDEF,
    /*[0x4D]*/ UNDEF,
    /*[0x4E]*/ UNDEF,
    /*[0x4F]*/ UNDEF,
    /*[0x50]*/ OP,        // PUSH r64
    /*[0x51]*/ OP,
    /*[0x52]*/ OP,
    /*[0x53]*/ OP,
    /*[0x54]*/ OP,
    /*[0x55]*/ OP,
    /*[0x56]*/ OP,
    /*[0x57]*/ OP,
    /*[0x58]*/ OP,        // POP r64
    /*[0x59]*/ OP,
    /*[0x5A]*/ OP,
    /*[0x5B]*/ OP,
    /*[0x5C]*/ OP,
    /*[0x5D]*/ OP,
    /*[0x5E]*/ OP,
    /*[0x5F]*/ OP,
    /*[0x60]*/ UNDEF,     // PUSHA
    /*[0x61]*/ UNDEF,     // POPA
    /*[0x62]*/ UNDEF,     // EVEX escape, handled before lookup
    /*[0x63]*/ RM,        // MOVSXD Gv,Ed
    /*[0x64]*/ UNDEF,     // FS: prefix
    /*[0x65]*/ UNDEF,     // GS: prefix
    /*[0x66]*/ UNDEF,     // operand-size prefix
    /*[0x67]*/ UNDEF,     // address-size prefix
    /*[0x68]*/ OP_IZ,     // PUSH Iz
    /*[0x69]*/ RM_IZ,     // IMUL Gv,Ev,Iz
    /*[0x6A]*/ OP_I8,     // PUSH Ib
    /*[0x6B]*/ RM_I8,     // IMUL Gv,Ev,Ib
    /*[0x6C]*/ OP,        // INS/OUTS
    /*[0x6D]*/ OP,
    /*[0x6E]*/ OP,
    /*[0x6F]*/ OP,
    /*[0x70]*/ JCC8,      // Jcc rel8
    /*[0x71]*/ JCC8,
    /*[0x72]*/ JCC8,
    /*[0x73]*/ JCC8,
    /*[0x74]*/ JCC8,
    /*[0x75]*/ JCC8,
    /*[0x76]*/ JCC8,
    /*[0x77]*/ JCC8,
    /*[0x78]*/ JCC8,
    /*[0x79]*/ JCC8,
    /*[0x7A]*/ JCC8,
    /*[0x7B]*/ JCC8,
    /*[0x7C]*/ JCC8,
    /*[0x7D]*/ JCC8,
    /*[0x7E]*/ JCC8,
    /*[0x7F]*/ JCC8,
    /*[0x80]*/ RM_I8,     // group 1 Eb,Ib
    /*[0x81]*/ RM_IZ,     // group 1 Ev,Iz
    /*[0x82]*/ UNDEF,     // group 1 alias, invalid in 64-bit
    /*[0x83]*/ RM_I8,     // group 1 Ev,Ib
    /*[0x84]*/ RM,        // TEST
    /*[0x85]*/ RM,
    /*[0x86]*/ RM,        // XCHG
    /*[0x87]*/ RM,
    /*[0x88]*/ RM,        // MOV
    /*[0x89]*/ RM,
    /*[0x8A]*/ RM,
    /*[0x8B]*/ RM,
    /*[0x8C]*/ RM,        // MOV Ev,Sw
    /*[0x8D]*/ RM,        // LEA
    /*[0x8E]*/ RM,        // MOV Sw,Ew
    /*[0x8F]*/ RM,        // POP Ev (group 1A)
    /*[0x90]*/ OP,        // NOP / XCHG r8
    /*[0x91]*/ OP,
    /*[0x92]*/ OP,
    /*[0x93]*/ OP,
    /*[0x94]*/ OP,
    /*[0x95]*/ OP,
    /*[0x96]*/ OP,
    /*[0x97]*/ OP,
    /*[0x98]*/ OP,        // CWDE/CDQE
    /*[0x99]*/ OP,        // CDQ/CQO
    /*[0x9A]*/ UNDEF,     // CALLF ptr, invalid in 64-bit
    /*[0x9B]*/ OP,        // FWAIT
    /*[0x9C]*/ OP,        // PUSHF
    /*[0x9D]*/ OP,        // POPF
    /*[0x9E]*/ OP,        // SAHF
    /*[0x9F]*/ OP,        // LAHF
    /*[0xA0]*/ OP_MOFFS,  // MOV AL,Ob
    /*[0xA1]*/ OP_MOFFS,  // MOV rAX,Ov
    /*[0xA2]*/ OP_MOFFS,
    /*[0xA3]*/ OP_MOFFS,
    /*[0xA4]*/ OP,        // MOVS/CMPS
    /*[0xA5]*/ OP,
    /*[0xA6]*/ OP,
    /*[0xA7]*/ OP,
    /*[0xA8]*/ OP_I8,     // TEST AL,Ib
    /*[0xA9]*/ OP_IZ,     // TEST rAX,Iz
    /*[0xAA]*/ OP,        // STOS/LODS/SCAS
    /*[0xAB]*/ OP,
    /*[0xAC]*/ OP,
    /*[0xAD]*/ OP,
    /*[0xAE]*/ OP,
    /*[0xAF]*/ OP,
    /*[0xB0]*/ OP_I8,     // MOV r8,Ib
    /*[0xB1]*/ OP_I8,
    /*[0xB2]*/ OP_I8,
    /*[0xB3]*/ OP_I8,
    /*[0xB4]*/ OP_I8,
    /*[0xB5]*/ OP_I8,
    /*[0xB6]*/ OP_I8,
    /*[0xB7]*/ OP_I8,
    /*[0xB8]*/ OP_IV,     // MOV r,Iv (imm64 with REX.W)
    /*[0xB9]*/ OP_IV,
    /*[0xBA]*/ OP_IV,
    /*[0xBB]*/ OP_IV,
    /*[0xBC]*/ OP_IV,
    /*[0xBD]*/ OP_IV,
    /*[0xBE]*/ OP_IV,
    /*[0xBF]*/ OP_IV,
    /*[0xC0]*/ RM_I8,     // group 2 Eb,Ib
    /*[0xC1]*/ RM_I8,     // group 2 Ev,Ib
    /*[0xC2]*/ RET_IW,    // RET imm16
    /*[0xC3]*/ RET_,      // RET
    /*[0xC4]*/ UNDEF,     // VEX escape, handled before lookup
    /*[0xC5]*/ UNDEF,     // VEX escape, handled before lookup
    /*[0xC6]*/ RM_I8,     // group 11 MOV Eb,Ib
    /*[0xC7]*/ RM_IZ,     // group 11 MOV Ev,Iz (also XBEGIN /7)
    /*[0xC8]*/ UNDEF,     // ENTER imm16,imm8 does not fit the field model; compilers do not emit it
    /*[0xC9]*/ OP,        // LEAVE
    /*[0xCA]*/ RET_IW,    // RETF imm16
    /*[0xCB]*/ RET_,      // RETF
    /*[0xCC]*/ OP,        // INT3
    /*[0xCD]*/ OP_I8,     // INT Ib
    /*[0xCE]*/ UNDEF,     // INTO
    /*[0xCF]*/ RET_,      // IRETQ
    /*[0xD0]*/ RM,        // group 2, shift by 1
    /*[0xD1]*/ RM,
    /*[0xD2]*/ RM,        // group 2, shift by CL
    /*[0xD3]*/ RM,
    /*[0xD4]*/ UNDEF,     // AAM
    /*[0xD5]*/ UNDEF,     // AAD
    /*[0xD6]*/ UNDEF,
    /*[0xD7]*/ OP,        // XLAT
    /*[0xD8]*/ RM,        // x87 escapes
    /*[0xD9]*/ RM,
    /*[0xDA]*/ RM,
    /*[0xDB]*/ RM,
    /*[0xDC]*/ RM,
    /*[0xDD]*/ RM,
    /*[0xDE]*/ RM,
    /*[0xDF]*/ RM,
    /*[0xE0]*/ LOOP8,     // LOOPNE
    /*[0xE1]*/ LOOP8,     // LOOPE
    /*[0xE2]*/ LOOP8,     // LOOP
    /*[0xE3]*/ LOOP8,     // JRCXZ
    /*[0xE4]*/ OP_I8,     // IN AL,Ib
    /*[0xE5]*/ OP_I8,
    /*[0xE6]*/ OP_I8,     // OUT Ib,AL
    /*[0xE7]*/ OP_I8,
    /*[0xE8]*/ CALL32,    // CALL rel32
    /*[0xE9]*/ JMP32,     // JMP rel32
    /*[0xEA]*/ UNDEF,     // JMPF ptr, invalid in 64-bit
    /*[0xEB]*/ JMP8,      // JMP rel8
    /*[0xEC]*/ OP,        // IN/OUT dx forms
    /*[0xED]*/ OP,
    /*[0xEE]*/ OP,
    /*[0xEF]*/ OP,
    /*[0xF0]*/ UNDEF,     // LOCK prefix
    /*[0xF1]*/ OP,        // INT1
    /*[0xF2]*/ UNDEF,     // REPNE prefix
    /*[0xF3]*/ UNDEF,     // REP prefix
    /*[0xF4]*/ OP,        // HLT
    /*[0xF5]*/ OP,        // CMC
    /*[0xF6]*/ GROUP3_B,  // group 3 Eb
    /*[0xF7]*/ GROUP3_Z,  // group 3 Ev
    /*[0xF8]*/ OP,        // CLC..STD
    /*[0xF9]*/ OP,
    /*[0xFA]*/ OP,
    /*[0xFB]*/ OP,
    /*[0xFC]*/ OP,
    /*[0xFD]*/ OP,
    /*[0xFE]*/ RM,        // group 4 INC/DEC Eb
    /*[0xFF]*/ GROUP5,    // group 5
};

// Two-byte opcode map (0F xx).
constexpr std::uint16_t kMap0F[256] = {
    /*[0x00]*/ RM,     // group 6
    /*[0x01]*/ RM,     // group 7
    /*[0x02]*/ RM,     // LAR
    /*[0x03]*/ RM,     // LSL
    /*[0x04]*/ UNDEF,
    /*[0x05]*/ OP,     // SYSCALL
    /*[0x06]*/ OP,     // CLTS
    /*[0x07]*/ OP,     // SYSRET
    /*[0x08]*/ OP,     // INVD
    /*[0x09]*/ OP,     // WBINVD
    /*[0x0A]*/ UNDEF,
    /*[0x0B]*/ OP,     // UD2
    /*[0x0C]*/ UNDEF,
    /*[0x0D]*/ RM,     // PREFETCH (group P)
    /*[0x0E]*/ UNDEF,  // FEMMS (3DNow)
    /*[0x0F]*/ UNDEF,  // 3DNow escape, unsupported
    /*[0x10]*/ RM,     // MOVUPS/SD/SS
    /*[0x11]*/ RM,
    /*[0x12]*/ RM,
    /*[0x13]*/ RM,
    /*[0x14]*/ RM,     // UNPCKLPS
    /*[0x15]*/ RM,
    /*[0x16]*/ RM,
    /*[0x17]*/ RM,
    /*[0x18]*/ RM,     // prefetch hints
    /*[0x19]*/ RM,     // reserved-NOP Ev
    /*[0x1A]*/ RM,
    /*[0x1B]*/ RM,
    /*[0x1C]*/ RM,
    /*[0x1D]*/ RM,
    /*[0x1E]*/ RM,     // reserved-NOP / ENDBR64
    /*[0x1F]*/ RM,     // multi-byte NOP Ev
    /*[0x20]*/ RM,     // MOV from CR
    /*[0x21]*/ RM,     // MOV from DR
    /*[0x22]*/ RM,
    /*[0x23]*/ RM,
    /*[0x24]*/ UNDEF,
    /*[0x25]*/ UNDEF,
    /*[0x26]*/ UNDEF,
    /*[0x27]*/ UNDEF,
    /*[0x28]*/ RM,     // MOVAPS
    /*[0x29]*/ RM,
    /*[0x2A]*/ RM,     // CVTSI2Sx
    /*[0x2B]*/ RM,
    /*[0x2C]*/ RM,
    /*[0x2D]*/ RM,
    /*[0x2E]*/ RM,     // UCOMISx
    /*[0x2F]*/ RM,     // COMISx
    /*[0x30]*/ OP,     // WRMSR
    /*[0x31]*/ OP,     // RDTSC
    /*[0x32]*/ OP,     // RDMSR
    /*[0x33]*/ OP,     // RDPMC
    /*[0x34]*/ OP,     // SYSENTER
    /*[0x35]*/ OP,     // SYSEXIT
    /*[0x36]*/ UNDEF,
    /*[0x37]*/ OP,     // GETSEC
    /*[0x38]*/ UNDEF,  // three-byte escape, handled before lookup
    /*[0x39]*/ UNDEF,
    /*[0x3A]*/ UNDEF,  // three-byte escape, handled before lookup
    /*[0x3B]*/ UNDEF,
    /*[0x3C]*/ UNDEF,
    /*[0x3D]*/ UNDEF,
    /*[0x3E]*/ UNDEF,
    /*[0x3F]*/ UNDEF,
    /*[0x40]*/ RM,     // CMOVcc
    /*[0x41]*/ RM,
    /*[0x42]*/ RM,
    /*[0x43]*/ RM,
    /*[0x44]*/ RM,
    /*[0x45]*/ RM,
    /*[0x46]*/ RM,
    /*[0x47]*/ RM,
    /*[0x48]*/ RM,
    /*[0x49]*/ RM,
    /*[0x4A]*/ RM,
    /*[0x4B]*/ RM,
    /*[0x4C]*/ RM,
    /*[0x4D]*/ RM,
    /*[0x4E]*/ RM,
    /*[0x4F]*/ RM,
    /*[0x50]*/ RM,     // MOVMSKPS
    /*[0x51]*/ RM,     // SQRTPS..MAXPS
    /*[0x52]*/ RM,
    /*[0x53]*/ RM,
    /*[0x54]*/ RM,
    /*[0x55]*/ RM,
    /*[0x56]*/ RM,
    /*[0x57]*/ RM,
    /*[0x58]*/ RM,
    /*[0x59]*/ RM,
    /*[0x5A]*/ RM,
    /*[0x5B]*/ RM,
    /*[0x5C]*/ RM,
    /*[0x5D]*/ RM,
    /*[0x5E]*/ RM,
    /*[0x5F]*/ RM,
    /*[0x60]*/ RM,     // PUNPCK..
    /*[0x61]*/ RM,
    /*[0x62]*/ RM,
    /*[0x63]*/ RM,
    /*[0x64]*/ RM,
    /*[0x65]*/ RM,
    /*[0x66]*/ RM,
    /*[0x67]*/ RM,
    /*[0x68]*/ RM,
    /*[0x69]*/ RM,
    /*[0x6A]*/ RM,
    /*[0x6B]*/ RM,
    /*[0x6C]*/ RM,
    /*[0x6D]*/ RM,
    /*[0x6E]*/ RM,     // MOVD/MOVQ
    /*[0x6F]*/ RM,     // MOVDQA/U
    /*[0x70]*/ RM_I8,  // PSHUFx
    /*[0x71]*/ RM_I8,  // group 12
    /*[0x72]*/ RM_I8,  // group 13
    /*[0x73]*/ RM_I8,  // group 14
    /*[0x74]*/ RM,     // PCMPEQx
    /*[0x75]*/ RM,
    /*[0x76]*/ RM,
    /*[0x77]*/ OP,     // EMMS
    /*[0x78]*/ RM,     // VMREAD
    /*[0x79]*/ RM,     // VMWRITE
    /*[0x7A]*/ UNDEF,
    /*[0x7B]*/ UNDEF,
    /*[0x7C]*/ RM,     // HADDPx
    /*[0x7D]*/ RM,
    /*[0x7E]*/ RM,     // MOVD/MOVQ
    /*[0x7F]*/ RM,
    /*[0x80]*/ JCC32,  // Jcc rel32
    /*[0x81]*/ JCC32,
    /*[0x82]*/ JCC32,
    /*[0x83]*/ JCC32,
    /*[0x84]*/ JCC32,
    /*[0x85]*/ JCC32,
    /*[0x86]*/ JCC32,
    /*[0x87]*/ JCC32,
    /*[0x88]*/ JCC32,
    /*[0x89]*/ JCC32,
    /*[0x8A]*/ JCC32,
    /*[0x8B]*/ JCC32,
    /*[0x8C]*/ JCC32,
    /*[0x8D]*/ JCC32,
    /*[0x8E]*/ JCC32,
    /*[0x8F]*/ JCC32,
    /*[0x90]*/ RM,     // SETcc
    /*[0x91]*/ RM,
    /*[0x92]*/ RM,
    /*[0x93]*/ RM,
    /*[0x94]*/ RM,
    /*[0x95]*/ RM,
    /*[0x96]*/ RM,
    /*[0x97]*/ RM,
    /*[0x98]*/ RM,
    /*[0x99]*/ RM,
    /*[0x9A]*/ RM,
    /*[0x9B]*/ RM,
    /*[0x9C]*/ RM,
    /*[0x9D]*/ RM,
    /*[0x9E]*/ RM,
    /*[0x9F]*/ RM,
    /*[0xA0]*/ OP,     // PUSH FS
    /*[0xA1]*/ OP,     // POP FS
    /*[0xA2]*/ OP,     // CPUID
    /*[0xA3]*/ RM,     // BT
    /*[0xA4]*/ RM_I8,  // SHLD Ib
    /*[0xA5]*/ RM,     // SHLD CL
    /*[0xA6]*/ UNDEF,
    /*[0xA7]*/ UNDEF,
    /*[0xA8]*/ OP,     // PUSH GS
    /*[0xA9]*/ OP,     // POP GS
    /*[0xAA]*/ OP,     // RSM
    /*[0xAB]*/ RM,     // BTS
    /*[0xAC]*/ RM_I8,  // SHRD Ib
    /*[0xAD]*/ RM,     // SHRD CL
    /*[0xAE]*/ RM,     // group 15 (fences, ldmxcsr, clflush)
    /*[0xAF]*/ RM,     // IMUL Gv,Ev
    /*[0xB0]*/ RM,     // CMPXCHG
    /*[0xB1]*/ RM,
    /*[0xB2]*/ RM,     // LSS
    /*[0xB3]*/ RM,     // BTR
    /*[0xB4]*/ RM,     // LFS
    /*[0xB5]*/ RM,     // LGS
    /*[0xB6]*/ RM,     // MOVZX
    /*[0xB7]*/ RM,
    /*[0xB8]*/ RM,     // POPCNT (F3)
    /*[0xB9]*/ RM,     // UD1
    /*[0xBA]*/ RM_I8,  // group 8 BT Ev,Ib
    /*[0xBB]*/ RM,     // BTC
    /*[0xBC]*/ RM,     // BSF/TZCNT
    /*[0xBD]*/ RM,     // BSR/LZCNT
    /*[0xBE]*/ RM,     // MOVSX
    /*[0xBF]*/ RM,
    /*[0xC0]*/ RM,     // XADD
    /*[0xC1]*/ RM,
    /*[0xC2]*/ RM_I8,  // CMPPS Ib
    /*[0xC3]*/ RM,     // MOVNTI
    /*[0xC4]*/ RM_I8,  // PINSRW
    /*[0xC5]*/ RM_I8,  // PEXTRW
    /*[0xC6]*/ RM_I8,  // SHUFPS
    /*[0xC7]*/ RM,     // group 9 (CMPXCHG8B/16B, RDRAND)
    /*[0xC8]*/ OP,     // BSWAP r
    /*[0xC9]*/ OP,
    /*[0xCA]*/ OP,
    /*[0xCB]*/ OP,
    /*[0xCC]*/ OP,
    /*[0xCD]*/ OP,
    /*[0xCE]*/ OP,
    /*[0xCF]*/ OP,
    /*[0xD0]*/ RM,     // ADDSUBPx
    /*[0xD1]*/ RM,     // PSRLW..
    /*[0xD2]*/ RM,
    /*[0xD3]*/ RM,
    /*[0xD4]*/ RM,
    /*[0xD5]*/ RM,
    /*[0xD6]*/ RM,     // MOVQ
    /*[0xD7]*/ RM,     // PMOVMSKB
    /*[0xD8]*/ RM,
    /*[0xD9]*/ RM,
    /*[0xDA]*/ RM,
    /*[0xDB]*/ RM,
    /*[0xDC]*/ RM,
    /*[0xDD]*/ RM,
    /*[0xDE]*/ RM,
    /*[0xDF]*/ RM,
    /*[0xE0]*/ RM,     // PAVGB..
    /*[0xE1]*/ RM,
    /*[0xE2]*/ RM,
    /*[0xE3]*/ RM,
    /*[0xE4]*/ RM,
    /*[0xE5]*/ RM,
    /*[0xE6]*/ RM,
    /*[0xE7]*/ RM,     // MOVNTQ
    /*[0xE8]*/ RM,
    /*[0xE9]*/ RM,
    /*[0xEA]*/ RM,
    /*[0xEB]*/ RM,
    /*[0xEC]*/ RM,
    /*[0xED]*/ RM,
    /*[0xEE]*/ RM,
    /*[0xEF]*/ RM,     // PXOR
    /*[0xF0]*/ RM,     // LDDQU
    /*[0xF1]*/ RM,
    /*[0xF2]*/ RM,
    /*[0xF3]*/ RM,
    /*[0xF4]*/ RM,
    /*[0xF5]*/ RM,
    /*[0xF6]*/ RM,     // PSADBW
    /*[0xF7]*/ RM,     // MASKMOVQ
    /*[0xF8]*/ RM,     // PSUBB..
    /*[0xF9]*/ RM,
    /*[0xFA]*/ RM,
    /*[0xFB]*/ RM,
    /*[0xFC]*/ RM,
    /*[0xFD]*/ RM,
    /*[0xFE]*/ RM,     // PADDD
    /*[0xFF]*/ RM,     // UD0
};

// The 0F 38 map is uniformly ModR/M with no immediate and the 0F 3A map is
// uniformly ModR/M + imm8; both are applied without per-opcode validity,
// which is exact for everything GCC emits from those maps.

bool is_legacy_prefix(std::uint8_t b) {
  switch (b) {
    case 0x26: case 0x2E: case 0x36: case 0x3E:  // segment overrides
    case 0x64: case 0x65:                        // FS/GS
    case 0x66: case 0x67:                        // operand/address size
    case 0xF0: case 0xF2: case 0xF3:             // LOCK/REPNE/REP
      return true;
    default:
      return false;
  }
}

std::string hex_byte(std::uint8_t b) {
  char buf[3];
  std::snprintf(buf, sizeof(buf), "%02X", b);
  return buf;
}

[[noreturn]] void throw_truncated(std::uint64_t offset) {
  throw TruncatedInstruction("instruction at offset " + std::to_string(offset) +
                             " extends past end of byte range");
}

}  // namespace

const char* to_string(BranchKind kind) {
  switch (kind) {
    case BranchKind::None: return "none";
    case BranchKind::JumpUnconditional: return "jump_unconditional";
    case BranchKind::JumpConditional: return "jump_conditional";
    case BranchKind::Call: return "call";
    case BranchKind::Ret: return "ret";
    case BranchKind::Indirect: return "indirect";
  }
  return "none";
}

DecodedInstruction decode_instruction(std::span<const std::uint8_t> bytes,
                                      std::uint64_t offset) {
  const std::uint64_t limit = bytes.size();
  std::uint64_t pos = offset;
  auto need = [&](std::uint64_t n) {
    if (pos + n > limit) throw_truncated(offset);
  };

  DecodedInstruction ins;
  ins.offset = offset;

  auto push_prefix = [&](std::uint8_t b) {
    if (ins.prefix_count == 4)
      throw UnknownOpcode("more than four prefix bytes at offset " +
                          std::to_string(offset));
    ins.prefix_bytes[ins.prefix_count++] = b;
  };

  // Prefix scan. A REX byte only acts when it immediately precedes the
  // opcode; a stale REX (followed by another prefix) is demoted to the
  // legacy list to keep the byte accounting exact.
  for (;;) {
    need(1);
    const std::uint8_t b = bytes[pos];
    if (is_legacy_prefix(b)) {
      if (ins.rex) {
        push_prefix(*ins.rex);
        ins.rex.reset();
      }
      push_prefix(b);
      ++pos;
      continue;
    }
    if (b >= 0x40 && b <= 0x4F) {
      if (ins.rex) push_prefix(*ins.rex);
      ins.rex = b;
      ++pos;
      continue;
    }
    break;
  }

  bool osize16 = false, asize32 = false;
  for (std::uint8_t i = 0; i < ins.prefix_count; ++i) {
    if (ins.prefix_bytes[i] == 0x66) osize16 = true;
    if (ins.prefix_bytes[i] == 0x67) asize32 = true;
  }
  const bool rexw = ins.rex && (*ins.rex & 0x08);

  // Opcode dispatch.
  need(1);
  const std::uint8_t b1 = bytes[pos++];
  std::uint16_t attr = 0;
  bool is_vex = false;
  Imm vex_imm = I_NONE;

  if (b1 == 0x0F) {
    need(1);
    const std::uint8_t b2 = bytes[pos++];
    if (b2 == 0x38 || b2 == 0x3A) {
      need(1);
      const std::uint8_t b3 = bytes[pos++];
      ins.opcode_raw = {0x0F, b2, b3};
      ins.opcode_len = 3;
      attr = (b2 == 0x38) ? RM : RM_I8;
    } else {
      ins.opcode_raw = {0x0F, b2, 0};
      ins.opcode_len = 2;
      attr = kMap0F[b2];
    }
  } else if (b1 == 0xC4 || b1 == 0xC5 || b1 == 0x62) {
    // VEX/EVEX: length-decode only. The escape byte stands in as the opcode
    // and the payload (including the real opcode byte) is counted separately.
    is_vex = true;
    const int payload = (b1 == 0xC5) ? 1 : (b1 == 0xC4) ? 2 : 3;
    need(payload + 1);
    std::uint8_t map = 1;
    if (b1 == 0xC4) map = bytes[pos] & 0x1F;
    if (b1 == 0x62) map = bytes[pos] & 0x07;
    pos += payload;
    const std::uint8_t vop = bytes[pos++];
    ins.opcode_raw = {b1, 0, 0};
    ins.opcode_len = 1;
    ins.vex_tail_len = static_cast<std::uint8_t>(payload + 1);
    switch (map) {
      case 1: {
        const std::uint16_t a = kMap0F[vop];
        if (!(a & VALID))
          throw UnknownOpcode("VEX map1 opcode " + hex_byte(vop));
        vex_imm = imm_of(a);
        break;
      }
      case 2: vex_imm = I_NONE; break;
      case 3: vex_imm = I_8; break;
      case 5: case 6: vex_imm = I_NONE; break;  // EVEX maps 5/6
      default:
        throw UnknownOpcode("unsupported VEX map " + std::to_string(map));
    }
    attr = VALID | MODRM | imm_bits(vex_imm);
    ins.vex = true;
  } else {
    ins.opcode_raw = {b1, 0, 0};
    ins.opcode_len = 1;
    attr = kMapOne[b1];
  }

  if (!(attr & VALID)) {
    std::string name;
    for (std::uint8_t i = 0; i < ins.opcode_len; ++i) name += hex_byte(ins.opcode_raw[i]);
    throw UnknownOpcode("no opcode table entry for " + name + " at offset " +
                        std::to_string(offset));
  }

  // ModR/M, SIB, displacement. Address-size override in 64-bit mode selects
  // 32-bit addressing, which has the same SIB/displacement structure.
  if (attr & MODRM) {
    need(1);
    const std::uint8_t m = bytes[pos++];
    ins.modrm = m;
    const std::uint8_t mod = m >> 6;
    const std::uint8_t rm_field = m & 7;
    if (mod != 3) {
      if (rm_field == 4) {
        need(1);
        ins.sib = bytes[pos++];
      }
      if (mod == 0) {
        if (rm_field == 5) {
          ins.disp_len = 4;  // RIP-relative
        } else if (ins.sib && (*ins.sib & 7) == 5) {
          ins.disp_len = 4;  // SIB with no base
        }
      } else if (mod == 1) {
        ins.disp_len = 1;
      } else {
        ins.disp_len = 4;
      }
    }
  }

  // Immediate length.
  Imm imm_class = imm_of(attr);
  if ((attr & GRP3) && ins.modrm) {
    const std::uint8_t reg = (*ins.modrm >> 3) & 7;
    if (reg >= 2) imm_class = I_NONE;  // only TEST /0 /1 carry an immediate
  }
  switch (imm_class) {
    case I_NONE: ins.imm_len = 0; break;
    case I_8: case R_8: ins.imm_len = 1; break;
    case I_16: ins.imm_len = 2; break;
    case I_Z: ins.imm_len = (osize16 && !rexw) ? 2 : 4; break;
    case I_V: ins.imm_len = rexw ? 8 : (osize16 ? 2 : 4); break;
    case I_MOFFS: ins.imm_len = asize32 ? 4 : 8; break;
    case R_32: ins.imm_len = 4; break;
  }

  need(ins.disp_len);
  pos += ins.disp_len;
  const std::uint64_t imm_pos = pos;
  need(ins.imm_len);
  pos += ins.imm_len;

  const std::uint64_t len = pos - offset;
  if (len > 15)
    throw UnknownOpcode("instruction at offset " + std::to_string(offset) +
                        " exceeds 15 bytes");
  ins.total_len = static_cast<std::uint8_t>(len);

  // Branch classification and relative-target resolution.
  if (!is_vex) {
    switch (br_of(attr)) {
      case B_NONE: break;
      case B_CALL: ins.branch_kind = BranchKind::Call; break;
      case B_JMP: ins.branch_kind = BranchKind::JumpUnconditional; break;
      case B_JCC: ins.branch_kind = BranchKind::JumpConditional; break;
      case B_RET: ins.branch_kind = BranchKind::Ret; break;
      case B_GRP5: {
        const std::uint8_t reg = (*ins.modrm >> 3) & 7;
        if (reg >= 2 && reg <= 5) ins.branch_kind = BranchKind::Indirect;
        break;
      }
    }
    if (attr & RESOLVE) {
      std::int64_t rel = 0;
      if (imm_class == R_8) {
        rel = static_cast<std::int8_t>(bytes[imm_pos]);
      } else {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes[imm_pos + i]} << (8 * i);
        rel = static_cast<std::int32_t>(v);
      }
      ins.rel_target = static_cast<std::int64_t>(offset + len) + rel;
    }
  }

  return ins;
}

std::vector<DecodedInstruction> decode_linear(std::span<const std::uint8_t> bytes,
                                              std::uint64_t start, std::uint64_t end) {
  std::vector<DecodedInstruction> out;
  const auto range = bytes.first(end);
  std::uint64_t off = start;
  while (off < end) {
    try {
      out.push_back(decode_instruction(range, off));
    } catch (const UnknownOpcode&) {
      // Recovery: one-byte INVALID pseudo-instruction, keep sweeping.
      DecodedInstruction bad;
      bad.offset = off;
      bad.opcode_raw = {range[off], 0, 0};
      bad.opcode_len = 1;
      bad.total_len = 1;
      bad.invalid = true;
      out.push_back(bad);
    } catch (const TruncatedInstruction&) {
      // An instruction cut off by the end of the range gets the same
      // one-byte recovery so the output still tiles [start, end).
      DecodedInstruction bad;
      bad.offset = off;
      bad.opcode_raw = {range[off], 0, 0};
      bad.opcode_len = 1;
      bad.total_len = 1;
      bad.invalid = true;
      out.push_back(bad);
    }
    off += out.back().total_len;
  }
  return out;
}

}  // namespace mcvd
